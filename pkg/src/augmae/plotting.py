"""Figures for training curves and embedding diagnostics, rendered to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 3.8)
DPI = 120


def _finish(fig, ax, path):
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    # pinned metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)


def plot_history(history: list[dict], path):
    """Reconstruction loss, uniformity and realized mask ratio per epoch."""
    epochs = np.array([row["epoch"] for row in history])
    fig, (ax, ax_ratio) = plt.subplots(2, 1, figsize=(FIGSIZE[0], FIGSIZE[1] * 1.4), sharex=True)
    ax.plot(epochs, [row["l_sce"] for row in history], label="SCE")
    ax.plot(epochs, [row["l_uni"] for row in history], label="uniformity")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    ax_ratio.plot(epochs, [row["mask_ratio"] for row in history], color="tab:green", label="mask ratio")
    ax_ratio.plot(epochs, [row["alpha_adv"] for row in history], color="tab:gray", ls="--", label="adversarial weight")
    ax_ratio.set_ylim(0.0, 1.0)
    ax_ratio.set_xlabel("epoch")
    ax_ratio.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    _finish(fig, ax_ratio, path)


def plot_alignment_histogram(counts, edges, path, label: str = "same-label pairs"):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    counts = np.asarray(counts, dtype=float)
    widths = np.diff(edges)
    total = counts.sum() if counts.sum() > 0 else 1.0
    ax.bar(edges[:-1], counts / total, width=widths, align="edge", edgecolor="white", label=label)
    ax.set_xlim(0.0, 2.0)
    ax.set_xlabel("distance between same-label embeddings")
    ax.set_ylabel("fraction of pairs")
    ax.legend(frameon=False)
    _finish(fig, ax, path)


def plot_sphere_density(density, path):
    """Density of 2-D embeddings on the unit circle, unrolled over the angle."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    widths = np.diff(density.bin_edges)
    hist = density.counts / max(density.counts.sum(), 1) / widths
    ax.bar(density.bin_edges[:-1], hist, width=widths, align="edge", alpha=0.4, label="histogram")
    ax.plot(density.grid, density.kde, color="k", label="kernel density")
    ax.set_xlim(-np.pi, np.pi)
    ax.set_xlabel("angle (rad)")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    _finish(fig, ax, path)
