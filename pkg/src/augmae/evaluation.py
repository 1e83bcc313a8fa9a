"""Downstream and diagnostic evaluation of frozen embeddings."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ContractError, SplitError
from .losses import uniformity_loss


@dataclass
class ProbeResult:
    accuracy: float
    per_class: dict[int, float]
    seed: int
    steps: int
    train_size: int
    test_size: int
    majority_baseline: float


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train fraction must lie in (0, 1), got {train_fraction}")
    order = np.random.default_rng(seed).permutation(n)
    k = max(1, int(round(train_fraction * n)))
    if k >= n:
        raise SplitError("split leaves no test nodes")
    return np.sort(order[:k]), np.sort(order[k:])


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def linear_probe(
    z, labels, train_fraction: float = 0.1, seed: int = 0, steps: int = 1000, lr: float = 0.1
) -> ProbeResult:
    """Multinomial logistic regression by full-batch gradient descent on frozen embeddings."""
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if classes.size < 2:
        raise SplitError("linear probe needs at least two classes")
    train, test = split_indices(z.shape[0], train_fraction, seed)
    missing = np.setdiff1d(classes, labels[train])
    if missing.size:
        raise SplitError(f"classes {missing.tolist()} absent from the training split")
    y = np.searchsorted(classes, labels)
    onehot = np.eye(classes.size)[y[train]]
    x = np.hstack([z[train], np.ones((train.size, 1))])
    w = np.zeros((x.shape[1], classes.size))
    for _ in range(steps):
        w -= lr * x.T @ (_softmax(x @ w) - onehot) / train.size
    pred = np.argmax(np.hstack([z[test], np.ones((test.size, 1))]) @ w, axis=1)
    correct = pred == y[test]
    per_class = {int(c): float(correct[y[test] == k].mean()) for k, c in enumerate(classes) if np.any(y[test] == k)}
    counts = np.bincount(y[test], minlength=classes.size)
    return ProbeResult(
        accuracy=float(correct.mean()),
        per_class=per_class,
        seed=seed,
        steps=steps,
        train_size=int(train.size),
        test_size=int(test.size),
        majority_baseline=float(counts.max() / test.size),
    )


@dataclass
class AlignmentResult:
    mean: float
    histogram: np.ndarray
    edges: np.ndarray
    pairs: int
    exhaustive: bool


def same_label_pairs(labels) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    i, j = np.triu_indices(labels.shape[0], k=1)
    keep = labels[i] == labels[j]
    return i[keep], j[keep]


def supervised_alignment(z, labels, pair_cap: int = 10_000, seed: int = 0, bins: int = 20) -> AlignmentResult:
    """Mean distance between same-label embeddings, with a histogram over [0, 2]."""
    z = np.asarray(z, dtype=np.float64)
    i, j = same_label_pairs(labels)
    if i.size == 0:
        raise ContractError("no same-label pairs")
    exhaustive = i.size <= pair_cap
    if not exhaustive:
        pick = np.random.default_rng(seed).choice(i.size, size=pair_cap, replace=False)
        i, j = i[pick], j[pick]
    dist = np.linalg.norm(z[i] - z[j], axis=1)
    hist, edges = np.histogram(np.clip(dist, 0.0, 2.0), bins=bins, range=(0.0, 2.0))
    return AlignmentResult(float(dist.mean()), hist, edges, int(i.size), exhaustive)


def uniformity_value(z, t: float = 2.0, pair_cap: int = 4096, seed: int = 0) -> float:
    return uniformity_loss(Tensor(z), t, pair_cap, seed).item()


@dataclass
class SphereDensity:
    angles: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    grid: np.ndarray
    kde: np.ndarray
    bandwidth: float

    @property
    def max_min_ratio(self) -> float:
        return float(self.kde.max() / max(self.kde.min(), np.finfo(float).tiny))

    def bin_of(self, angle) -> np.ndarray:
        k = np.searchsorted(self.bin_edges, angle, side="right") - 1
        return np.clip(k, 0, self.counts.size - 1)


def wrap_angle(theta):
    return np.mod(np.asarray(theta) + np.pi, 2.0 * np.pi) - np.pi


def export_sphere_density(z, bins: int = 36, bandwidth: float = 0.2, points: int = 360) -> SphereDensity:
    """Angular histogram and wrapped-Gaussian density of embeddings on the unit circle."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != 2:
        raise ContractError(f"sphere density needs 2-D embeddings, got shape {z.shape}")
    if bandwidth <= 0:
        raise ContractError("bandwidth must be positive")
    angles = wrap_angle(np.arctan2(z[:, 1], z[:, 0]))
    edges = np.linspace(-np.pi, np.pi, bins + 1)
    counts = np.histogram(angles, bins=edges)[0]
    grid = -np.pi + 2.0 * np.pi * np.arange(points) / points
    diff = wrap_angle(grid[:, None] - angles[None, :])
    # images one period away keep the kernel periodic for wide bandwidths
    shifts = 2.0 * np.pi * np.arange(-2, 3)
    kern = np.exp(-((diff[..., None] + shifts) ** 2) / (2.0 * bandwidth**2)).sum(axis=-1)
    kde = kern.mean(axis=1) / (np.sqrt(2.0 * np.pi) * bandwidth)
    return SphereDensity(angles, edges, counts, grid, kde, bandwidth)


def write_density_csv(density: SphereDensity, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["angle", "histogram_count", "kde_value"])
        for angle, k, value in zip(density.grid, density.bin_of(density.grid), density.kde):
            writer.writerow([repr(float(angle)), int(density.counts[k]), repr(float(value))])


@dataclass
class DiagnosticsReport:
    alignment_mean: float
    alignment_histogram: list[int]
    uniformity: float
    probe_accuracy: float | None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "alignment_mean": self.alignment_mean,
            "alignment_histogram": self.alignment_histogram,
            "uniformity": self.uniformity,
            "probe_accuracy": self.probe_accuracy,
        }
        out.update(self.extra)
        return out

    def write(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def diagnostics(
    z,
    labels,
    t: float = 2.0,
    pair_cap: int = 10_000,
    uniformity_pair_cap: int = 4096,
    train_fraction: float = 0.1,
    seed: int = 0,
    probe_steps: int = 1000,
    probe_lr: float = 0.1,
) -> tuple[DiagnosticsReport, AlignmentResult, ProbeResult | None]:
    align = supervised_alignment(z, labels, pair_cap, seed)
    try:
        probe = linear_probe(z, labels, train_fraction, seed, probe_steps, probe_lr)
    except SplitError:
        probe = None
    report = DiagnosticsReport(
        alignment_mean=align.mean,
        alignment_histogram=align.histogram.tolist(),
        uniformity=uniformity_value(z, t, uniformity_pair_cap, seed),
        probe_accuracy=None if probe is None else probe.accuracy,
        extra={
            "alignment_pairs": align.pairs,
            "probe_majority_baseline": None if probe is None else probe.majority_baseline,
            "probe_per_class": None if probe is None else {str(k): v for k, v in probe.per_class.items()},
        },
    )
    return report, align, probe
