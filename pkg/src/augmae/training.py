"""Alternating adversarial optimization of the mask generator and the autoencoder."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, NonFiniteLossError
from .graph import Graph
from .losses import LossConfig, generator_objective, model_objective, sce_loss, uniformity_loss
from .masking import (
    MaskGenerator,
    Schedule,
    alpha_at,
    bernoulli_mask,
    gumbel_binarize,
    mix_probabilities,
    random_probabilities,
)
from .model import CHECKPOINT_VERSION, Model, ModelConfig

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "l_sce", "l_uni", "gen_objective", "mask_ratio", "alpha_adv")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr_model: float = 1e-3
    lr_generator: float = 1e-4
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 5e-4
    t_uniformity: float = 2.0
    uniformity_pair_cap: int = 4096
    tau: float = 1.0
    mask_ratio: float = 0.5
    alpha0: float = 0.0
    alphaT: float = 1.0
    eta: float = 1.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = 5.0
    d_hidden: int = 32
    d_out: int = 16
    enc_layers: int = 2
    dec_layers: int = 1
    gen_hidden: int = 16

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.lr_model <= 0 or self.lr_generator <= 0:
            raise ConfigError("learning rates must be positive")
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive")
        if not 0.0 < self.mask_ratio < 1.0:
            raise ConfigError(f"mask_ratio must lie in (0, 1), got {self.mask_ratio}")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        self.loss_config()
        self.schedule()

    def loss_config(self) -> LossConfig:
        return LossConfig(
            gamma=self.gamma,
            t_uniformity=self.t_uniformity,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            uniformity_pair_cap=self.uniformity_pair_cap,
        )

    def schedule(self) -> Schedule:
        return Schedule(self.alpha0, self.alphaT, self.eta, max(self.epochs, 1))

    def model_config(self, d_in: int) -> ModelConfig:
        return ModelConfig(
            d_in=d_in,
            d_hidden=self.d_hidden,
            d_out=self.d_out,
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
        )

    @classmethod
    def from_mapping(cls, mapping) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in mapping.items() if k in names})


# --- optimizer ------------------------------------------------------------


def adam_step(values, grads, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """One bias-corrected Adam update of ``values`` in place; ``t`` counts from 1."""
    for value, grad, m_k, v_k in zip(values, grads, m, v):
        g = grad + weight_decay * value if weight_decay else grad
        m_k *= beta1
        m_k += (1.0 - beta1) * g
        v_k *= beta2
        v_k += (1.0 - beta2) * g * g
        m_hat = m_k / (1.0 - beta1**t)
        v_hat = v_k / (1.0 - beta2**t)
        value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return values


class Adam:
    def __init__(self, params: list[Tensor], lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        adam_step(
            [p.value for p in self.params],
            grads,
            self.m,
            self.v,
            self.t,
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
            self.weight_decay,
        )


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float, bool]:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm, True
    return grads, norm, False


# --- state ----------------------------------------------------------------


@dataclass
class EpochReport:
    epoch: int
    l_sce: float
    l_uni: float
    gen_objective: float
    mask_ratio: float
    alpha_adv: float
    gen_sce: float = float("nan")
    mean_prob: float = float("nan")
    gen_grad_norm: float = 0.0
    model_grad_norm: float = 0.0
    gen_clipped: bool = False
    model_clipped: bool = False


@dataclass
class TrainState:
    model: Model
    generator: MaskGenerator
    model_opt: Adam
    gen_opt: Adam
    rng: np.random.Generator
    epoch: int = 0
    history: list[EpochReport] = field(default_factory=list)


def init_state(graph: Graph, config: TrainConfig) -> TrainState:
    model_seed, gen_seed, mask_seed = np.random.SeedSequence(config.seed).spawn(3)
    model = Model(config.model_config(graph.feature_dim), rng=np.random.default_rng(model_seed))
    generator = MaskGenerator(graph.feature_dim, config.gen_hidden, rng=np.random.default_rng(gen_seed))
    adam = dict(beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps, weight_decay=config.weight_decay)
    return TrainState(
        model=model,
        generator=generator,
        model_opt=Adam(model.parameters(), config.lr_model, **adam),
        gen_opt=Adam(generator.parameters(), config.lr_generator, **adam),
        rng=np.random.default_rng(mask_seed),
    )


def _zero(params):
    for p in params:
        p.zero_grad()


def _check_finite(name, value, state, extra):
    if not math.isfinite(value):
        snapshot = {"epoch": state.epoch, "term": name, **extra}
        raise NonFiniteLossError(f"non-finite {name} at epoch {state.epoch}: {snapshot}", snapshot)


def train_epoch(state: TrainState, graph: Graph, config: TrainConfig) -> EpochReport:
    """One generator ascent step followed by one autoencoder descent step."""
    model, gen = state.model, state.generator
    all_params = model.parameters() + gen.parameters()
    x = graph.features
    alpha = alpha_at(config.schedule(), state.epoch)
    prob_rand = random_probabilities(graph.n, config.mask_ratio)

    # generator step: soft masks keep the reconstruction error differentiable in the generator
    _zero(all_params)
    prob = mix_probabilities(prob_rand, gen.probabilities(graph), alpha)
    sample = gumbel_binarize(prob, config.tau, state.rng)
    _, x_hat = model.forward(graph, model.apply_mask(x, sample, "soft"))
    gen_sce = sce_loss(x, x_hat, sample.soft, config.gamma)
    gen_obj = generator_objective(gen_sce, sample.soft, config.lambda1)
    _check_finite("gen_objective", gen_obj.item(), state, {"gen_sce": gen_sce.item()})
    (-gen_obj).backward()
    gen_grads, gen_norm, gen_clipped = clip_global_norm([p.grad for p in gen.parameters()], config.clip_norm)
    state.gen_opt.step(gen_grads)

    # autoencoder step: fresh hard mask from the updated generator
    _zero(all_params)
    prob = mix_probabilities(prob_rand, gen.probabilities(graph).value[:, 0], alpha)
    sample = gumbel_binarize(prob, config.tau, state.rng)
    if not sample.hard.any():
        sample.hard[int(np.argmax(sample.soft.value[:, 0]))] = 1.0
    z, x_hat = model.forward(graph, model.apply_mask(x, sample, "hard"))
    l_sce = sce_loss(x, x_hat, sample.hard, config.gamma)
    l_uni = uniformity_loss(z, config.t_uniformity, config.uniformity_pair_cap, seed=config.seed)
    objective = model_objective(l_sce, l_uni, alpha, config.lambda2)
    _check_finite("model_objective", objective.item(), state, {"l_sce": l_sce.item(), "l_uni": l_uni.item()})
    objective.backward()
    model_grads, model_norm, model_clipped = clip_global_norm(
        [p.grad for p in model.parameters()], config.clip_norm
    )
    state.model_opt.step(model_grads)
    _zero(all_params)

    report = EpochReport(
        epoch=state.epoch,
        l_sce=l_sce.item(),
        l_uni=l_uni.item(),
        gen_objective=gen_obj.item(),
        mask_ratio=sample.ratio,
        alpha_adv=alpha,
        gen_sce=gen_sce.item(),
        mean_prob=float(np.mean(prob)),
        gen_grad_norm=gen_norm,
        model_grad_norm=model_norm,
        gen_clipped=gen_clipped,
        model_clipped=model_clipped,
    )
    state.history.append(report)
    state.epoch += 1
    return report


@dataclass
class FitResult:
    model: Model
    history: list[EpochReport]
    state: TrainState


def fit(graph: Graph, config: TrainConfig, state: TrainState | None = None, callback=None) -> FitResult:
    """Train until ``config.epochs`` epochs are complete (resuming ``state`` if given)."""
    state = init_state(graph, config) if state is None else state
    while state.epoch < config.epochs:
        report = train_epoch(state, graph, config)
        if callback is not None:
            callback(state, report)
        if report.epoch % 50 == 0:
            logger.debug("epoch %d l_sce=%.4f ratio=%.3f", report.epoch, report.l_sce, report.mask_ratio)
    return FitResult(state.model, state.history, state)


# --- diagnostics ----------------------------------------------------------


def mask_sce(model: Model, graph: Graph, hard: np.ndarray, gamma: float) -> float:
    x_hat = model.reconstruct(graph, model.apply_mask(graph.features, hard, "hard"))
    return sce_loss(graph.features, x_hat, hard, gamma).item()


def adversarial_gap(state: TrainState, graph: Graph, config: TrainConfig, draws: int = 64, seed: int = 0):
    """Mean SCE under the generator's own masks and under random masks of the same expected ratio."""
    rng = np.random.default_rng(seed)
    prob_adv = state.generator.probabilities(graph).value[:, 0]
    ratio = float(prob_adv.mean())
    adv, rand = [], []
    for _ in range(draws):
        for probs, out in ((prob_adv, adv), (np.full(graph.n, ratio), rand)):
            hard = bernoulli_mask(probs, rng).hard
            if hard.any():
                out.append(mask_sce(state.model, graph, hard, config.gamma))
    return float(np.mean(adv)), float(np.mean(rand))


# --- persistence ----------------------------------------------------------


def write_history(history: list[EpochReport], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for r in history:
            writer.writerow([r.epoch] + [repr(float(getattr(r, c))) for c in HISTORY_COLUMNS[1:]])


def read_history(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k == "epoch" else float(v)) for k, v in row.items()} for row in csv.DictReader(fh)
        ]


def checkpoint(state: TrainState, config: TrainConfig, path):
    """Write model, generator, optimizer moments, sampler state and history to one ``.npz``."""
    header = {
        "format": "augmae-train-state",
        "version": CHECKPOINT_VERSION,
        "config": asdict(state.model.config),
        "train": asdict(config),
        "epoch": state.epoch,
        "rng": state.rng.bit_generator.state,
        "adam_t": [state.model_opt.t, state.gen_opt.t],
        "history": [asdict(r) for r in state.history],
    }
    arrays = dict(state.model.state_arrays())
    for k, p in enumerate(state.generator.parameters()):
        arrays[f"gen_{k}"] = p.value
    for tag, opt in (("model", state.model_opt), ("gen", state.gen_opt)):
        for k, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"adam_{tag}_m_{k}"] = m
            arrays[f"adam_{tag}_v_{k}"] = v
    try:
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc}") from exc


def resume(path, graph: Graph) -> tuple[TrainState, TrainConfig]:
    from .model import read_header

    try:
        bundle = np.load(Path(path), allow_pickle=False)
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc}") from exc
    with bundle:
        header = read_header(bundle)
        if header.get("format") != "augmae-train-state":
            raise ConfigError(f"{path} is not a training checkpoint")
        config = TrainConfig(**header["train"])
        state = init_state(graph, config)
        state.model.load_state_arrays(bundle)
        for k, p in enumerate(state.generator.parameters()):
            p.value = np.array(bundle[f"gen_{k}"])
        for tag, opt in (("model", state.model_opt), ("gen", state.gen_opt)):
            opt.m = [np.array(bundle[f"adam_{tag}_m_{k}"]) for k in range(len(opt.params))]
            opt.v = [np.array(bundle[f"adam_{tag}_v_{k}"]) for k in range(len(opt.params))]
        state.model_opt.t, state.gen_opt.t = header["adam_t"]
        state.rng.bit_generator.state = header["rng"]
        state.epoch = header["epoch"]
        state.history = [EpochReport(**r) for r in header["history"]]
    return state, config
