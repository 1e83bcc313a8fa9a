"""Reconstruction, alignment, uniformity and mask-ratio objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, EmptyMaskError

RATIO_CLAMP = 1e-4


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 2.0
    t_uniformity: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 5e-4
    uniformity_pair_cap: int = 4096

    def __post_init__(self):
        if self.gamma < 1:
            raise ConfigError(f"gamma must be >= 1, got {self.gamma}")
        if self.t_uniformity <= 0:
            raise ConfigError("t_uniformity must be positive")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("regularizer weights must be non-negative")
        if self.uniformity_pair_cap < 1:
            raise ConfigError("uniformity_pair_cap must be positive")


def _weights(weights, n: int) -> Tensor:
    w = ad.as_tensor(weights)
    if w.shape != (n, 1):
        raise ContractError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w.value < 0):
        raise ContractError("weights must be non-negative")
    if not np.sum(w.value) > 0:
        raise EmptyMaskError("no node carries positive weight (empty mask)")
    return w


def per_node_sce(x, x_hat, gamma: float) -> Tensor:
    cos = ad.rowwise_dot(x, x_hat)
    return ad.power(ad.clip(1.0 - cos, 0.0, 2.0), gamma)


def sce_loss(x, x_hat, weights, gamma: float = 2.0) -> Tensor:
    """Weighted mean of ``(1 - x_i . xhat_i) ** gamma`` over unit-norm rows."""
    x, x_hat = ad.as_tensor(x), ad.as_tensor(x_hat)
    w = _weights(weights, x.shape[0])
    return (w * per_node_sce(x, x_hat, gamma)).sum() / w.sum()


def alignment_loss(z, z_pos) -> Tensor:
    """Mean squared distance between positive pairs (matched rows)."""
    z, z_pos = ad.as_tensor(z), ad.as_tensor(z_pos)
    if z.shape[0] == 0:
        raise ContractError("alignment needs at least one pair")
    diff = z - z_pos
    return (diff * diff).sum(axis=1).mean()


def uniformity_pairs(n: int, cap: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs when there are at most ``cap`` of them, else ``cap`` seeded uniform draws."""
    if n < 2:
        raise ContractError("uniformity needs at least two points")
    if n * (n - 1) // 2 <= cap:
        return np.triu_indices(n, k=1)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=cap)
    j = rng.integers(0, n - 1, size=cap)
    j = j + (j >= i)
    return i, j


def uniformity_loss(z, t: float = 2.0, pair_cap: int = 4096, seed: int = 0) -> Tensor:
    """Log of the mean Gaussian potential ``exp(-t |z_i - z_j|^2)`` over distinct pairs."""
    z = ad.as_tensor(z)
    i, j = uniformity_pairs(z.shape[0], pair_cap, seed)
    diff = ad.take_rows(z, i) - ad.take_rows(z, j)
    sq = (diff * diff).sum(axis=1)
    return ad.log(ad.exp(sq * (-t)).mean())


def ratio_regularizer(m_soft) -> Tensor:
    """``1 / sin(pi * mean(m))``; minimal (=1) at a mask ratio of one half."""
    ratio = ad.clip(ad.as_tensor(m_soft).mean(), RATIO_CLAMP, 1.0 - RATIO_CLAMP)
    return 1.0 / ad.sin(ratio * np.pi)


def pretext_loss(h_out, hg_out, weights=None) -> Tensor:
    h_out, hg_out = ad.as_tensor(h_out), ad.as_tensor(hg_out)
    if h_out.shape != hg_out.shape:
        raise ContractError(f"row mismatch: {h_out.shape} vs {hg_out.shape}")
    if h_out.shape[0] == 0:
        raise ContractError("pretext loss needs at least one row")
    w = _weights(np.ones(h_out.shape[0]) if weights is None else weights, h_out.shape[0])
    return -(w * ad.rowwise_dot(h_out, hg_out)).sum() / w.sum()


def context_alignment_loss(pair_weights, h_out) -> Tensor:
    """``-sum_{c,c+} A[c,c+] h(c).h(c+) / sum(A)`` for a context-pair weight matrix ``A``."""
    a = np.asarray(pair_weights, dtype=np.float64)
    h_out = ad.as_tensor(h_out)
    if a.shape != (h_out.shape[0], h_out.shape[0]):
        raise ContractError(f"pair weights {a.shape} do not match {h_out.shape[0]} contexts")
    if np.any(a < 0) or not a.sum() > 0:
        raise ContractError("pair weights must be non-negative and not all zero")
    gram = h_out @ h_out.T
    return -(gram * a).sum() * (1.0 / a.sum())


def generator_objective(l_sce, m_soft, lambda1: float) -> Tensor:
    """Quantity the mask generator maximizes."""
    return ad.as_tensor(l_sce) - lambda1 * ratio_regularizer(m_soft)


def model_objective(l_sce, l_uni, alpha_adv: float, lambda2: float) -> Tensor:
    """Quantity the autoencoder minimizes; the uniformity weight fades as masking turns adversarial."""
    return ad.as_tensor(l_sce) + ((1.0 - alpha_adv) * lambda2) * ad.as_tensor(l_uni)
