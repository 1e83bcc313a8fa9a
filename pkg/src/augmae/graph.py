"""Graph container, propagation-matrix normalization, synthetic SBM data and file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .autodiff import NORM_FLOOR, Tensor
from .errors import ConfigError, ContractError, DegenerateInputError, ParseError

UNIT_TOL = 1e-12


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Unit-normalize rows, leaving rows already within ``UNIT_TOL`` of unit norm untouched."""
    x = np.array(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms < NORM_FLOOR):
        raise DegenerateInputError(f"feature row {int(np.argmin(norms))} is (near) zero")
    off = np.abs(norms - 1.0) > UNIT_TOL
    x[off] = x[off] / norms[off, None]
    return x


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph with self-loops, unit-norm features and optional labels."""

    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractError(f"adjacency must be square, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ContractError("adjacency must be symmetric")
        if not np.all((a == 0.0) | (a == 1.0)):
            raise ContractError("adjacency entries must be 0/1")
        np.fill_diagonal(a, 1.0)
        x = normalize_rows(self.features)
        if x.shape[0] != a.shape[0]:
            raise ContractError(f"{x.shape[0]} feature rows for {a.shape[0]} nodes")
        a.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if y.shape[0] != a.shape[0]:
                raise ContractError(f"{y.shape[0]} labels for {a.shape[0]} nodes")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edge_list(self) -> list[tuple[int, int]]:
        """Undirected edges ``u < v`` without self-loops."""
        u, v = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(u.tolist(), v.tolist()))

    @cached_property
    def propagation(self) -> Tensor:
        return Tensor(sym_normalize(self.adjacency))


def sym_normalize(adjacency: np.ndarray) -> np.ndarray:
    """``D^-1/2 A D^-1/2`` for an adjacency that already carries self-loops."""
    a = np.asarray(adjacency, dtype=np.float64)
    if np.any(np.diag(a) == 0.0):
        raise DegenerateInputError("every node needs a self-loop before normalization")
    deg = a.sum(axis=1)
    if np.any(deg <= 0.0):
        raise DegenerateInputError("node with zero degree")
    inv_sqrt = 1.0 / np.sqrt(deg)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def from_edges(n: int, edges, features, labels=None) -> Graph:
    a = np.zeros((n, n))
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise IndexError(f"edge ({u}, {v}) out of range for {n} nodes")
        a[u, v] = a[v, u] = 1.0
    return Graph(a, features, labels)


@dataclass(frozen=True)
class SbmSpec:
    sizes: tuple[int, ...] = (50, 50)
    p_intra: float = 0.2
    p_inter: float = 0.02
    feature_dim: int = 16
    feature_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not self.sizes or any(s <= 0 for s in self.sizes):
            raise ConfigError(f"block sizes must be positive, got {self.sizes}")
        if not (0.0 <= self.p_inter < self.p_intra <= 1.0):
            raise ConfigError(
                f"need 0 <= p_inter < p_intra <= 1, got p_inter={self.p_inter}, p_intra={self.p_intra}"
            )
        if self.feature_dim <= 0:
            raise ConfigError("feature_dim must be positive")
        if self.feature_noise < 0:
            raise ConfigError("feature_noise must be non-negative")

    @property
    def blocks(self) -> int:
        return len(self.sizes)


def generate_sbm(spec: SbmSpec) -> Graph:
    """Planted-partition graph whose features are noisy, unit-normalized block centroids."""
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat(np.arange(spec.blocks), spec.sizes)
    n = labels.size
    same = labels[:, None] == labels[None, :]
    p = np.where(same, spec.p_intra, spec.p_inter)
    draws = rng.random((n, n))
    upper = np.triu(draws < p, k=1)
    adjacency = (upper | upper.T).astype(np.float64)

    centroids = rng.standard_normal((spec.blocks, spec.feature_dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    noise = rng.standard_normal((n, spec.feature_dim))
    features = centroids[labels] + spec.feature_noise * noise
    return Graph(adjacency, features, labels)


# --- file formats ---------------------------------------------------------


def _read_lines(path):
    try:
        return Path(path).read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def read_features(path) -> np.ndarray:
    rows = []
    for k, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError:
            raise ParseError(path, k, f"non-numeric feature value in {line!r}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(path, k, f"expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ParseError(path, 1, "no feature rows")
    return np.array(rows, dtype=np.float64)


def read_edges(path, n: int) -> list[tuple[int, int]]:
    edges = []
    for k, line in enumerate(_read_lines(path), start=1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 2:
            raise ParseError(path, k, f"expected 'u v', got {line!r}")
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError:
            raise ParseError(path, k, f"non-integer node id in {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise IndexError(f"{path}:{k}: node id out of range for {n} nodes: {line!r}")
        edges.append((u, v))
    return edges


def read_labels(path) -> np.ndarray:
    labels = []
    for k, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            labels.append(int(line.strip()))
        except ValueError:
            raise ParseError(path, k, f"non-integer label {line!r}") from None
    return np.array(labels, dtype=np.int64)


def load_graph(edge_path, feature_path, label_path=None) -> Graph:
    features = read_features(feature_path)
    n = features.shape[0]
    edges = read_edges(edge_path, n)
    labels = None
    if label_path is not None:
        labels = read_labels(label_path)
        if labels.shape[0] != n:
            raise ParseError(label_path, labels.shape[0], f"{labels.shape[0]} labels for {n} nodes")
    return from_edges(n, edges, features, labels)


def _write_matrix(path, matrix: np.ndarray):
    lines = [",".join(repr(float(v)) for v in row) for row in np.atleast_2d(matrix)]
    Path(path).write_text("\n".join(lines) + "\n")


def save_graph(graph: Graph, edge_path, feature_path, label_path=None):
    Path(edge_path).write_text("".join(f"{u} {v}\n" for u, v in graph.edge_list()))
    _write_matrix(feature_path, graph.features)
    if label_path is not None:
        if graph.labels is None:
            raise ContractError("graph has no labels to save")
        Path(label_path).write_text("".join(f"{int(y)}\n" for y in graph.labels))


def save_embeddings(z, path):
    z = z.value if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    _write_matrix(path, z)


def load_embeddings(path) -> np.ndarray:
    return read_features(path)


@dataclass(frozen=True)
class DataPaths:
    root: Path
    edges: Path = field(init=False)
    features: Path = field(init=False)
    labels: Path = field(init=False)

    def __post_init__(self):
        root = Path(self.root)
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "edges", root / "edges.txt")
        object.__setattr__(self, "features", root / "features.csv")
        object.__setattr__(self, "labels", root / "labels.csv")

    def load(self) -> Graph:
        return load_graph(self.edges, self.features, self.labels if self.labels.exists() else None)
