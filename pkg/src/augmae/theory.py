"""Numerical certification of the reconstruction-to-alignment bound chain.

A :class:`BoundInstance` is a context-feature bipartite graph: ``weights[c, f]``
is the joint probability that a masked node with feature ``f`` is reconstructed
from context ``c``. With unit-norm autoencoder outputs ``h`` on contexts and
pseudo-autoencoder outputs ``hg`` on features, three inequalities must hold:

* ``sce >= gamma/2 * pretext - gamma/2 * eps + (1 - gamma/2)``
* ``pretext >= 1/2 * context_alignment - 1/2``
* ``sce >= gamma/4 * context_alignment - gamma/2 * eps + (1 - 3 gamma/4)``

Each verifier also reports the slack of every intermediate step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, PreconditionError
from .graph import Graph
from .masking import glorot
from .training import Adam

UNIT_TOL = 1e-9
FEATURE_TOL = 1e-9
EXHAUSTIVE_LIMIT = 12


# --- instance -------------------------------------------------------------


@dataclass
class BoundInstance:
    weights: np.ndarray
    features: np.ndarray
    h: np.ndarray
    hg: np.ndarray
    context_override: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.h = np.atleast_2d(np.asarray(self.h, dtype=np.float64))
        self.hg = np.atleast_2d(np.asarray(self.hg, dtype=np.float64))

    @property
    def n_contexts(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    @property
    def context_degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def feature_degrees(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    @property
    def normalized_adjacency(self) -> np.ndarray:
        dc, df = self.context_degrees, self.feature_degrees
        return self.weights / np.sqrt(dc)[:, None] / np.sqrt(df)[None, :]

    @property
    def H(self) -> np.ndarray:
        return np.sqrt(self.context_degrees)[:, None] * self.h

    @property
    def H_g(self) -> np.ndarray:
        return np.sqrt(self.feature_degrees)[:, None] * self.hg

    @property
    def derived_context_graph(self) -> np.ndarray:
        return (self.weights / self.feature_degrees[None, :]) @ self.weights.T

    @property
    def context_graph(self) -> np.ndarray:
        """Positive-pair weights between contexts (the override, when poisoned)."""
        if self.context_override is not None:
            return self.context_override
        return self.derived_context_graph

    def validate(self, tol: float = UNIT_TOL):
        w = self.weights
        c, f = w.shape
        if self.h.shape[0] != c or self.hg.shape[0] != f or self.features.shape[0] != f:
            raise PreconditionError(
                f"shape mismatch: weights {w.shape}, h {self.h.shape}, hg {self.hg.shape}, "
                f"features {self.features.shape}"
            )
        if not (self.h.shape[1] == self.hg.shape[1] == self.features.shape[1]):
            raise PreconditionError("h, hg and features must share a dimension")
        if np.any(w < 0):
            raise PreconditionError("joint probabilities must be non-negative")
        if abs(w.sum() - 1.0) > tol:
            raise PreconditionError(f"joint probabilities sum to {w.sum()}, not 1")
        if np.any(self.context_degrees <= 0) or np.any(self.feature_degrees <= 0):
            raise PreconditionError("every context and feature needs positive probability")
        for name, rows in (("h", self.h), ("hg", self.hg), ("features", self.features)):
            if np.max(np.abs(np.linalg.norm(rows, axis=1) - 1.0)) > tol:
                raise PreconditionError(f"{name} rows must be unit-norm")
        if abs(np.sum(self.H_g**2) - 1.0) > tol:
            raise PreconditionError("squared Frobenius norm of H_g differs from 1")
        a_c = self.derived_context_graph
        if np.max(np.abs(a_c - a_c.T)) > tol or abs(a_c.sum() - 1.0) > tol:
            raise PreconditionError("context graph must be symmetric with unit mass")

    def poisoned(self, strength: float = 8.0) -> "BoundInstance":
        """Copy with a corrupted, asymmetric context graph that raises the alignment term by at least ``strength``."""
        a_c = self.derived_context_graph.copy()
        gram = self.h @ self.h.T
        upper = np.triu(np.ones_like(gram, dtype=bool), k=1)
        a_c[upper] -= strength * np.sign(gram[upper])
        a_c[0, 0] -= strength
        return replace(self, context_override=a_c)


# --- quantities -----------------------------------------------------------


def sce_value(inst: BoundInstance, gamma: float) -> float:
    cos = inst.h @ inst.features.T
    return float(np.sum(inst.weights * np.clip(1.0 - cos, 0.0, 2.0) ** gamma))


def pretext_value(inst: BoundInstance) -> float:
    return float(-np.sum(inst.weights * (inst.h @ inst.hg.T)))


def pretext_trace(inst: BoundInstance) -> float:
    # the context-by-feature adjacency is transposed so that the product conforms
    return float(-np.trace(inst.H_g.T @ inst.normalized_adjacency.T @ inst.H))


def pretext_trace_identity(inst: BoundInstance) -> tuple[float, float]:
    """The pretext loss as an expectation and as a trace of the normalized bipartite adjacency."""
    return pretext_value(inst), pretext_trace(inst)


def context_alignment_value(inst: BoundInstance) -> float:
    return float(-np.sum(inst.context_graph * (inst.h @ inst.h.T)))


def epsilon_value(inst: BoundInstance) -> float:
    """Weighted residual of the pseudo-autoencoder on the masked-feature distribution."""
    return float(np.sum(inst.feature_degrees * np.sum((inst.hg - inst.features) ** 2, axis=1)))


@dataclass
class BoundReport:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    epsilon: float | None = None
    steps: dict[str, float] = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs - self.tolerance

    @property
    def steps_ok(self) -> bool:
        return all(v >= -self.tolerance for v in self.steps.values())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "passed": self.passed,
            "epsilon": self.epsilon,
            "steps": dict(self.steps),
        }


def _require_eps(eps):
    if eps is None:
        raise ContractError("the pseudo-autoencoder residual eps must be provided")
    return float(eps)


def _sce_chain_steps(inst: BoundInstance, gamma: float, eps: float) -> dict[str, float]:
    w = inst.weights
    cos = inst.h @ inst.features.T
    sq_rec = np.sum((inst.h[:, None, :] - inst.features[None, :, :]) ** 2, axis=2)
    sq_pseudo = np.sum((inst.hg - inst.features) ** 2, axis=1)[None, :]
    sq_cross = np.sum((inst.h[:, None, :] - inst.hg[None, :, :]) ** 2, axis=2)
    dot_cross = inst.h @ inst.hg.T
    powered = np.clip(1.0 - cos, 0.0, 2.0) ** gamma
    linear = 1.0 - gamma * cos
    support = w > 0
    return {
        "bernoulli": float(np.sum(w * powered) - np.sum(w * linear)),
        "bernoulli_pointwise_min": float(np.min((powered - linear)[support])),
        "unit_distance_identity": -abs(
            float(np.sum(w * linear) - (1.0 - gamma + gamma / 2.0 * np.sum(w * sq_rec)))
        ),
        "residual_assumption": eps - epsilon_value(inst),
        "sum_of_squares": float(np.sum(w * (sq_rec + sq_pseudo)) - 0.5 * np.sum(w * sq_cross)),
        "cross_distance_identity": -abs(float(np.sum(w * sq_cross) - np.sum(w * (2.0 - 2.0 * dot_cross)))),
    }


def verify_sce_pretext(inst: BoundInstance, gamma: float, eps=None, tol: float = UNIT_TOL) -> BoundReport:
    """SCE is bounded below by the scaled pretext loss."""
    eps = _require_eps(eps)
    rhs = gamma / 2.0 * pretext_value(inst) - gamma / 2.0 * eps + (1.0 - gamma / 2.0)
    return BoundReport(
        "sce_pretext", sce_value(inst, gamma), rhs, tol, eps, _sce_chain_steps(inst, gamma, eps)
    )


def _alignment_steps(inst: BoundInstance) -> dict[str, float]:
    a_t = inst.normalized_adjacency.T
    trace = float(np.trace(inst.H_g.T @ a_t @ inst.H))
    hg_sq = float(np.sum(inst.H_g**2))
    prop_sq = float(np.sum((a_t @ inst.H) ** 2))
    direct, via_trace = pretext_trace_identity(inst)
    return {
        "trace_identity": -abs(direct - via_trace),
        "young": 0.5 * (hg_sq + prop_sq) - trace,
        "hg_unit_mass": -abs(hg_sq - 1.0),
        "context_graph_expansion": -abs(prop_sq + context_alignment_value(inst)),
    }


def verify_pretext_alignment(inst: BoundInstance, tol: float = UNIT_TOL) -> BoundReport:
    """Pretext loss is bounded below by half the context-level alignment loss, minus a half."""
    rhs = 0.5 * context_alignment_value(inst) - 0.5
    return BoundReport("pretext_alignment", pretext_value(inst), rhs, tol, None, _alignment_steps(inst))


def verify_sce_alignment(inst: BoundInstance, gamma: float, eps=None, tol: float = UNIT_TOL) -> BoundReport:
    """The chained bound from SCE to the context-level alignment loss."""
    eps = _require_eps(eps)
    const = 1.0 - gamma / 2.0 - gamma / 4.0
    rhs = gamma / 4.0 * context_alignment_value(inst) - gamma / 2.0 * eps + const
    first = verify_sce_pretext(inst, gamma, eps, tol)
    second = verify_pretext_alignment(inst, tol)
    steps = {f"pretext.{k}": v for k, v in first.steps.items()}
    steps.update({f"alignment.{k}": v for k, v in second.steps.items()})
    steps["sce_pretext"] = first.slack
    steps["pretext_alignment"] = second.slack
    return BoundReport("sce_alignment", sce_value(inst, gamma), rhs, tol, eps, steps)


# --- random instances -----------------------------------------------------


def _unit(rng, k, d):
    x = rng.standard_normal((k, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _normalize(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_weights(rng, n_contexts: int, n_features: int) -> np.ndarray:
    w = rng.exponential(size=(n_contexts, n_features)) * (rng.random((n_contexts, n_features)) < 0.5)
    # every context and feature keeps at least one edge
    w[np.arange(n_contexts), rng.integers(0, n_features, n_contexts)] += rng.exponential(size=n_contexts)
    w[rng.integers(0, n_contexts, n_features), np.arange(n_features)] += rng.exponential(size=n_features)
    return w / w.sum()


def random_instance(rng, max_contexts: int = 8, max_features: int = 8, max_dim: int = 5) -> BoundInstance:
    """A random context-feature graph with unit outputs of varied difficulty."""
    c = int(rng.integers(1, max_contexts + 1))
    f = int(rng.integers(1, max_features + 1))
    d = int(rng.integers(1, max_dim + 1))
    w = random_weights(rng, c, f)
    x = _unit(rng, f, d)
    kind = rng.integers(0, 3)
    if kind == 0:
        h = _unit(rng, c, d)
    elif kind == 1:
        # outputs near the probability-weighted mean of the features each context reconstructs
        h = _normalize((w / w.sum(axis=1, keepdims=True)) @ x + 0.1 * rng.standard_normal((c, d)) + 1e-12)
    else:
        h = _normalize(x[rng.integers(0, f, c)] + rng.uniform(0, 0.5) * rng.standard_normal((c, d)))
    hg = _normalize(x + rng.uniform(0.0, 1.0) * rng.choice([0.0, 1.0]) * rng.standard_normal((f, d)))
    return BoundInstance(w, x, h, hg)


def random_gamma(rng) -> float:
    return float(rng.choice([1.0, 2.0, 3.0])) if rng.random() < 0.75 else float(rng.uniform(1.0, 4.0))


# --- adversarial search ---------------------------------------------------


def _violation(which: str, w: np.ndarray, x: np.ndarray, h: Tensor, hg: Tensor, gamma: float) -> Tensor:
    wt = Tensor(w)
    df = w.sum(axis=0)
    a_c = Tensor((w / df[None, :]) @ w.T)
    pretext = -(wt * (h @ hg.T)).sum()
    align = -(a_c * (h @ h.T)).sum()
    if which == "pretext_alignment":
        return 0.5 * align - 0.5 - pretext
    diff = hg - Tensor(x)
    eps = (Tensor(df[:, None]) * (diff * diff)).sum()
    sce = (wt * ad.power(ad.clip(1.0 - h @ Tensor(x).T, 0.0, 2.0), gamma)).sum()
    if which == "sce_pretext":
        bound = gamma / 2.0 * pretext - gamma / 2.0 * eps + (1.0 - gamma / 2.0)
    else:
        bound = gamma / 4.0 * align - gamma / 2.0 * eps + (1.0 - 0.75 * gamma)
    return bound - sce


def adversarial_search(rng, which: str, steps: int = 100, lr: float = 0.05) -> tuple[float, BoundInstance, float]:
    """Gradient ascent on ``rhs - lhs`` over unit outputs for a fixed random bipartite graph.

    Returns the largest violation seen, the final instance and the gamma used.
    """
    base = random_instance(rng)
    gamma = random_gamma(rng)
    u = Tensor(base.h + 0.01 * rng.standard_normal(base.h.shape), requires_grad=True)
    v = Tensor(base.hg + 0.01 * rng.standard_normal(base.hg.shape), requires_grad=True)
    opt = Adam([u, v], lr)
    worst = -np.inf
    for _ in range(steps):
        u.zero_grad()
        v.zero_grad()
        viol = _violation(which, base.weights, base.features, ad.row_l2_normalize(u), ad.row_l2_normalize(v), gamma)
        worst = max(worst, viol.item())
        (-viol).backward()
        opt.step([u.grad, v.grad])
    final = replace(base, h=_normalize(u.value), hg=_normalize(v.value))
    return worst, final, gamma


# --- masked-graph construction -------------------------------------------


@dataclass
class MaskDistribution:
    """A finite set of node masks with probabilities summing to one."""

    masks: np.ndarray
    probs: np.ndarray
    exact: bool = True

    def __post_init__(self):
        self.masks = np.atleast_2d(np.asarray(self.masks, dtype=np.float64))
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if self.masks.shape[0] == 0 or self.masks.shape[0] != self.probs.shape[0]:
            raise ContractError("mask distribution has empty or mismatched support")
        if np.any(self.probs < 0) or not self.probs.sum() > 0:
            raise ContractError("mask probabilities must be non-negative with positive total")

    @classmethod
    def explicit(cls, pairs) -> "MaskDistribution":
        pairs = list(pairs)
        if not pairs:
            raise ContractError("empty mask support")
        masks, probs = zip(*pairs)
        return cls(np.array(masks), np.array(probs))

    @classmethod
    def independent(cls, probs, samples: int = 4096, seed: int = 0, limit: int = EXHAUSTIVE_LIMIT):
        """Independent Bernoulli masking: exhaustive up to ``limit`` nodes, Monte-Carlo beyond."""
        p = np.asarray(probs, dtype=np.float64).reshape(-1)
        n = p.shape[0]
        if n <= limit:
            masks = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
            weights = np.prod(np.where(masks == 1.0, p, 1.0 - p), axis=1)
            keep = weights > 0
            return cls(masks[keep], weights[keep], exact=True)
        rng = np.random.default_rng(seed)
        masks = (rng.random((samples, n)) < p).astype(np.float64)
        return cls(masks, np.full(samples, 1.0 / samples), exact=False)


def feature_key(x: np.ndarray, tol: float = FEATURE_TOL) -> tuple:
    return tuple(np.round(np.asarray(x) / tol).astype(np.int64).tolist())


def context_keys(graph: Graph, mask: np.ndarray, hops: int, fkeys: list[tuple]) -> list[tuple]:
    """Canonical rooted encodings of every node's ``hops``-hop masked computation tree.

    A node's label is its feature (or the mask marker) plus its degree; children
    are sorted, so isomorphic masked neighbourhoods share a key.
    """
    deg = graph.degrees.astype(np.int64).tolist()
    labels = [(1, (), deg[i]) if mask[i] else (0, fkeys[i], deg[i]) for i in range(graph.n)]
    nbrs = [graph.neighbors(i).tolist() for i in range(graph.n)]
    keys = [(lab, ()) for lab in labels]
    for _ in range(hops):
        keys = [(labels[i], tuple(sorted(keys[j] for j in nbrs[i]))) for i in range(graph.n)]
    return keys


@dataclass
class ContextFeatureGraph:
    graph: Graph
    distribution: MaskDistribution
    hops: int
    weights: np.ndarray
    features: np.ndarray
    context_keys: list
    feature_keys: list
    representatives: list[tuple[int, int]]

    @property
    def context_graph(self) -> np.ndarray:
        return (self.weights / self.weights.sum(axis=0)[None, :]) @ self.weights.T

    def instance(self, outputs: Callable[[np.ndarray], np.ndarray], hg: Callable[[np.ndarray], np.ndarray]) -> BoundInstance:
        """Attach autoencoder outputs (``outputs(mask) -> n x d``) and pseudo-autoencoder outputs."""
        cache: dict[int, np.ndarray] = {}
        rows = []
        for s, node in self.representatives:
            if s not in cache:
                cache[s] = np.asarray(outputs(self.distribution.masks[s]))
            rows.append(cache[s][node])
        return BoundInstance(self.weights, self.features, np.array(rows), np.asarray(hg(self.features)))

    def occurrences(self):
        """Yield ``(mask_index, node, context_index)`` for every masked-node occurrence."""
        index = {k: c for c, k in enumerate(self.context_keys)}
        fk = [feature_key(x) for x in self.graph.features]
        for s, mask in enumerate(self.distribution.masks):
            keys = context_keys(self.graph, mask, self.hops, fk)
            for i in np.flatnonzero(mask):
                yield s, int(i), index[keys[i]]


def build_context_feature_graph(graph: Graph, distribution: MaskDistribution, hops: int) -> ContextFeatureGraph:
    """Joint probabilities of (masked context, masked feature) when a masked node is drawn uniformly."""
    fk = [feature_key(x) for x in graph.features]
    feature_index: dict[tuple, int] = {}
    feature_rows = []
    for i, k in enumerate(fk):
        if k not in feature_index:
            feature_index[k] = len(feature_rows)
            feature_rows.append(graph.features[i])
    context_index: dict[tuple, int] = {}
    reps: list[tuple[int, int]] = []
    entries: dict[tuple[int, int], float] = {}
    total = 0.0
    for s, (mask, p) in enumerate(zip(distribution.masks, distribution.probs)):
        masked = np.flatnonzero(mask)
        if masked.size == 0 or p == 0:
            continue
        total += p
        keys = context_keys(graph, mask, hops, fk)
        share = p / masked.size
        for i in masked:
            c = context_index.setdefault(keys[i], len(context_index))
            if c == len(reps):
                reps.append((s, int(i)))
            key = (c, feature_index[fk[i]])
            entries[key] = entries.get(key, 0.0) + share
    if total == 0.0:
        raise ContractError("mask distribution never masks a node")
    w = np.zeros((len(context_index), len(feature_rows)))
    for (c, f), v in entries.items():
        w[c, f] = v
    w /= total
    return ContextFeatureGraph(
        graph=graph,
        distribution=distribution,
        hops=hops,
        weights=w,
        features=np.array(feature_rows),
        context_keys=list(context_index),
        feature_keys=list(feature_index),
        representatives=reps,
    )


# --- pseudo-autoencoder ---------------------------------------------------


class PseudoAutoencoder:
    """Single-node MLP autoencoder: the graph encoder/decoder with every neighbourhood removed."""

    def __init__(self, d: int, hidden: int = 64, rng=None, slope: float = 0.25):
        rng = np.random.default_rng(rng)
        self.slope = slope
        self.w1 = Tensor(glorot(rng, d, hidden), requires_grad=True)
        self.b1 = Tensor(np.zeros((1, hidden)), requires_grad=True)
        self.w2 = Tensor(glorot(rng, hidden, d), requires_grad=True)
        self.b2 = Tensor(np.zeros((1, d)), requires_grad=True)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, x) -> Tensor:
        hidden = ad.prelu(ad.as_tensor(x) @ self.w1 + self.b1, self.slope)
        return ad.row_l2_normalize(hidden @ self.w2 + self.b2)

    def __call__(self, x) -> np.ndarray:
        return self.forward(np.atleast_2d(x)).value


def measure_epsilon(hg: Callable[[np.ndarray], np.ndarray], features, weights=None) -> float:
    """Expected squared residual ``|hg(x) - x|^2`` over the masked-feature distribution."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    out = np.asarray(hg(x))
    if np.max(np.abs(np.linalg.norm(out, axis=1) - 1.0)) > UNIT_TOL:
        raise ContractError("pseudo-autoencoder outputs must be unit-norm")
    return float(np.sum(w * np.sum((out - x) ** 2, axis=1)) / np.sum(w))


def train_pseudo_autoencoder(
    features, weights=None, hidden: int = 64, steps: int = 2000, lr: float = 1e-2, seed: int = 0
) -> PseudoAutoencoder:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    w = Tensor(w / w.sum())
    net = PseudoAutoencoder(x.shape[1], hidden, rng=seed)
    opt = Adam(net.parameters(), lr)
    target = Tensor(x)
    for _ in range(steps):
        for p in net.parameters():
            p.zero_grad()
        diff = net.forward(target) - target
        loss = (w * (diff * diff).sum(axis=1)).sum()
        loss.backward()
        opt.step([p.grad for p in net.parameters()])
    return net


# --- campaign -------------------------------------------------------------

THEOREMS = ("sce_pretext", "pretext_alignment", "sce_alignment")


def check_instance(inst: BoundInstance, gamma: float, eps: float, tol: float = UNIT_TOL, validate=True):
    if validate:
        inst.validate()
    return {
        "sce_pretext": verify_sce_pretext(inst, gamma, eps, tol),
        "pretext_alignment": verify_pretext_alignment(inst, tol),
        "sce_alignment": verify_sce_alignment(inst, gamma, eps, tol),
    }


@dataclass
class CertificationConfig:
    instances: int = 10_000
    restarts: int = 100
    adversarial_steps: int = 100
    seed: int = 0
    tolerance: float = 1e-9
    trace_tolerance: float = 1e-12
    poison: bool = False
    graph_instances: int = 3


class _Tally:
    def __init__(self):
        self.checked = 0
        self.violations = 0
        self.min_slack = np.inf
        self.max_violation = 0.0
        self.failing_seeds: list = []
        self.step_min: dict[str, float] = {}

    def add(self, report: BoundReport, seed):
        self.checked += 1
        self.min_slack = min(self.min_slack, report.slack)
        if not report.passed:
            self.violations += 1
            self.max_violation = max(self.max_violation, -report.slack)
            if len(self.failing_seeds) < 20:
                self.failing_seeds.append(seed)
        for k, v in report.steps.items():
            self.step_min[k] = min(self.step_min.get(k, np.inf), v)

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "passed": self.checked - self.violations,
            "violations": self.violations,
            "min_slack": float(self.min_slack),
            "max_violation": float(self.max_violation),
            "failing_seeds": self.failing_seeds,
            "step_min_slack": {k: float(v) for k, v in sorted(self.step_min.items())},
        }


def graph_instance(seed: int):
    """A bound instance derived from a small trained masked autoencoder on an 8-node planted-partition graph."""
    from .graph import SbmSpec, generate_sbm
    from .training import TrainConfig, fit

    graph = generate_sbm(SbmSpec(sizes=(4, 4), p_intra=0.6, p_inter=0.1, feature_dim=4, feature_noise=0.3, seed=seed))
    config = TrainConfig(epochs=30, d_hidden=8, d_out=4, lr_model=1e-2, seed=seed)
    model = fit(graph, config).model
    cfg = build_context_feature_graph(graph, MaskDistribution.independent(np.full(graph.n, 0.5)), model.config.hops)
    hg = train_pseudo_autoencoder(cfg.features, cfg.weights.sum(axis=0), hidden=32, steps=500, seed=seed)

    def outputs(mask):
        return model.reconstruct(graph, model.apply_mask(graph.features, mask)).value

    return cfg.instance(outputs, hg)


def certify(config: CertificationConfig) -> dict:
    """Check every bound on random, adversarially searched and graph-derived instances."""
    tallies = {k: _Tally() for k in THEOREMS}
    trace_residual = 0.0
    bernoulli_noninteger_negative = 0
    for s in range(config.instances):
        seed = [config.seed, s]
        rng = np.random.default_rng(seed)
        inst = random_instance(rng)
        gamma = random_gamma(rng)
        inst.validate()
        eps = epsilon_value(inst)
        if config.poison:
            inst = inst.poisoned()
        reports = check_instance(inst, gamma, eps, config.tolerance, validate=False)
        for k, rep in reports.items():
            tallies[k].add(rep, s)
        if gamma != int(gamma) and reports["sce_pretext"].steps["bernoulli_pointwise_min"] < 0:
            bernoulli_noninteger_negative += 1
        direct, via_trace = pretext_trace_identity(inst)
        trace_residual = max(trace_residual, abs(direct - via_trace))

    adversarial = {}
    for k in THEOREMS:
        worst = -np.inf
        for r in range(config.restarts):
            value, _, _ = adversarial_search(np.random.default_rng([config.seed, 1, r]), k, config.adversarial_steps)
            worst = max(worst, value)
        adversarial[k] = {
            "restarts": config.restarts,
            "max_violation": float(worst),
            "passed": bool(worst <= config.tolerance),
        }

    derived = []
    for g in range(config.graph_instances):
        inst = graph_instance(config.seed + g)
        inst.validate()
        eps = epsilon_value(inst)
        for gamma in (1.0, 2.0, 3.0):
            reports = check_instance(inst, gamma, eps, config.tolerance)
            derived.append(
                {
                    "seed": config.seed + g,
                    "gamma": gamma,
                    "contexts": inst.n_contexts,
                    "features": inst.n_features,
                    "epsilon": eps,
                    "slack": {k: r.slack for k, r in reports.items()},
                    "passed": all(r.passed for r in reports.values()),
                }
            )

    summary = {k: t.to_dict() for k, t in tallies.items()}
    passed = (
        all(t.violations == 0 for t in tallies.values())
        and all(a["passed"] for a in adversarial.values())
        and trace_residual <= config.trace_tolerance
        and all(d["passed"] for d in derived)
    )
    return {
        "passed": bool(passed),
        "tolerance": config.tolerance,
        "poisoned": config.poison,
        "random": summary,
        "trace_identity": {
            "max_residual": float(trace_residual),
            "tolerance": config.trace_tolerance,
            "passed": bool(trace_residual <= config.trace_tolerance),
        },
        "adversarial": adversarial,
        "graph_derived": derived,
        "bernoulli_noninteger_negative_pointwise": bernoulli_noninteger_negative,
    }
