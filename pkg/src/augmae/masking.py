"""Random and adversarial node masking, Gumbel binarization and the easy-to-hard schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DomainError, RangeError
from .graph import Graph

PROB_EPS = 1e-6
SOFT_EPS = 1e-15


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class MaskGenerator:
    """One propagation layer plus a linear head emitting per-node mask probabilities.

    The head starts at zero, so an untrained generator masks every node with
    probability 0.5.
    """

    def __init__(self, d_in: int, d_hidden: int = 16, rng=None, slope: float = 0.25):
        rng = np.random.default_rng(rng)
        self.slope = slope
        self.weight = Tensor(glorot(rng, d_in, d_hidden), requires_grad=True, name="gen.weight")
        self.head = Tensor(np.zeros((d_hidden, 1)), requires_grad=True, name="gen.head")
        self.bias = Tensor(np.zeros((1, 1)), requires_grad=True, name="gen.bias")

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.head, self.bias]

    def probabilities(self, graph: Graph) -> Tensor:
        hidden = ad.prelu(graph.propagation @ (Tensor(graph.features) @ self.weight), self.slope)
        logits = hidden @ self.head + self.bias
        return ad.clip(ad.sigmoid(logits), PROB_EPS, 1.0 - PROB_EPS)


def adv_probabilities(generator: MaskGenerator, graph: Graph) -> Tensor:
    return generator.probabilities(graph)


@dataclass
class MaskSample:
    """One draw of a node mask.

    ``hard`` is the 0/1 mask used in the forward pass. ``soft`` is the
    Gumbel-sigmoid relaxation; it is ``None`` for masks drawn without a
    relaxation (plain Bernoulli sampling).
    """

    prob: np.ndarray
    hard: np.ndarray
    soft: Tensor | None = None
    noise: np.ndarray | None = None
    tau: float | None = None

    @property
    def masked_set(self) -> np.ndarray:
        return np.flatnonzero(self.hard)

    @property
    def ratio(self) -> float:
        return float(self.hard.mean())

    @property
    def hard_tensor(self) -> Tensor:
        """Hard mask whose gradient is routed through the soft relaxation."""
        if self.soft is None:
            return Tensor(self.hard)
        return ad.straight_through(self.soft, self.hard)


def gumbel_binarize(prob, tau: float = 1.0, rng=None, noise=None) -> MaskSample:
    """Relax Bernoulli(prob) with Gumbel noise, then threshold the relaxation at 0.5.

    ``noise`` may be passed as an ``(n, 2)`` array of the two Gumbel draws
    per node; otherwise it is sampled from ``rng``.
    """
    if not tau > 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    prob = ad.as_tensor(prob)
    p = prob.value[:, 0]
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("mask probabilities must lie strictly inside (0, 1)")
    n = p.shape[0]
    if noise is None:
        noise = np.random.default_rng(rng).gumbel(size=(n, 2))
    noise = np.asarray(noise, dtype=np.float64).reshape(n, 2)
    logit = ad.log(prob) - ad.log(1.0 - prob)
    soft = ad.sigmoid((logit + (noise[:, 0] - noise[:, 1])[:, None]) * (1.0 / tau))
    soft = ad.clip(soft, SOFT_EPS, 1.0 - SOFT_EPS)
    hard = (soft.value[:, 0] >= 0.5).astype(np.float64)
    return MaskSample(prob=p.copy(), hard=hard, soft=soft, noise=noise, tau=float(tau))


def mix_probabilities(prob_rand, prob_adv, alpha_adv: float):
    if not 0.0 <= alpha_adv <= 1.0:
        raise RangeError(f"alpha_adv must lie in [0, 1], got {alpha_adv}")
    if isinstance(prob_rand, Tensor) or isinstance(prob_adv, Tensor):
        return ad.as_tensor(prob_rand) * (1.0 - alpha_adv) + ad.as_tensor(prob_adv) * alpha_adv
    return (1.0 - alpha_adv) * np.asarray(prob_rand, dtype=np.float64) + alpha_adv * np.asarray(
        prob_adv, dtype=np.float64
    )


def random_probabilities(n: int, ratio: float) -> np.ndarray:
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"mask ratio must lie in (0, 1), got {ratio}")
    return np.full(n, float(ratio))


def bernoulli_mask(prob, rng) -> MaskSample:
    """Plain Bernoulli draw without a relaxation (a hard-only mask)."""
    p = np.asarray(prob, dtype=np.float64).reshape(-1)
    hard = (np.random.default_rng(rng).random(p.shape[0]) < p).astype(np.float64)
    return MaskSample(prob=p.copy(), hard=hard)


@dataclass(frozen=True)
class Schedule:
    """Polynomial growth of the adversarial weight from ``alpha0`` to ``alphaT`` over ``total`` epochs."""

    alpha0: float = 0.0
    alphaT: float = 1.0
    eta: float = 1.0
    total: int = 200

    def __post_init__(self):
        if not (0.0 <= self.alpha0 <= self.alphaT <= 1.0):
            raise ConfigError(f"need 0 <= alpha0 <= alphaT <= 1, got {self.alpha0}, {self.alphaT}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.total < 1:
            raise ConfigError(f"total epochs must be >= 1, got {self.total}")


def alpha_at(schedule: Schedule, t: float) -> float:
    if not 0 <= t <= schedule.total:
        raise RangeError(f"epoch {t} outside [0, {schedule.total}]")
    if t == schedule.total:
        return schedule.alphaT
    growth = (t / schedule.total) ** schedule.eta
    # the clamp stops rounding in the difference from overshooting the endpoint
    return min(schedule.alpha0 + growth * (schedule.alphaT - schedule.alpha0), schedule.alphaT)
