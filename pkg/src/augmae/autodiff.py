"""Dense-matrix reverse-mode automatic differentiation.

Every value is a float64 matrix. Scalars are stored as 1x1 and vectors as
column matrices so that broadcasting against ``n x d`` blocks is uniform.
Operations are recorded as they execute; :meth:`Tensor.backward` replays the
recorded operations reachable from the root in exact reverse order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DegenerateInputError, DimensionError, DomainError

NORM_FLOOR = 1e-12

_sequence = itertools.count()


def _as_array(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"tensors are 2-D matrices, got shape {arr.shape}")
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    for axis in (0, 1):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: "Tensor", b: "Tensor") -> tuple[int, int]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"shapes {a.shape} and {b.shape} do not broadcast") from exc


class Tensor:
    """A matrix that may participate in reverse-mode differentiation."""

    __array_priority__ = 100

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = _as_array(value)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.value) if self.requires_grad else None
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._seq = next(_sequence)

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label})"

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        return power(self, exponent)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis: int | None = None) -> "Tensor":
        return tensor_sum(self, axis)

    def mean(self, axis: int | None = None) -> "Tensor":
        return tensor_mean(self, axis)

    def backward(self) -> "Tape":
        """Populate ``grad`` on every tensor that requires it.

        Gradients accumulate across calls until :meth:`zero_grad` is used.
        """
        if self.shape != (1, 1):
            raise ContractError(f"backward() needs a 1x1 root, got {self.shape}")
        tape = Tape.reachable_from(self)
        adjoints: dict[int, np.ndarray] = {id(self): np.ones((1, 1))}
        for node in reversed(tape.records):
            g = adjoints.pop(id(node), None)
            if g is None:
                continue
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
            node.grad += g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + pg
                else:
                    adjoints[key] = pg
        return tape


@dataclass
class Tape:
    """Operations that contribute to a root, in recording order."""

    records: list[Tensor] = field(default_factory=list)

    @classmethod
    def reachable_from(cls, root: Tensor) -> "Tape":
        seen: dict[int, Tensor] = {}
        stack = [root]
        while stack:
            node = stack.pop()
            if id(node) in seen or not node.requires_grad:
                continue
            seen[id(node)] = node
            stack.extend(node._parents)
        return cls(sorted(seen.values(), key=lambda t: t._seq))

    @property
    def ops(self) -> list[str]:
        return [t.op for t in self.records]


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(value: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.value = value
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out.name = None
    out.op = op
    out._seq = next(_sequence)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


# --- binary elementwise ---------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return _record(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return _record(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return _record(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    if np.any(b.value == 0.0):
        raise DomainError("division by zero")
    out = a.value / b.value

    def backward(g):
        return (
            _unbroadcast(g / b.value, a.shape),
            _unbroadcast(-g * out / b.value, b.shape),
        )

    return _record(out, (a, b), backward, "div")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return _record(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
        "matmul",
    )


# --- unary elementwise ----------------------------------------------------


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.value)
    return _record(out, (x,), lambda g: (g * out,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.value <= 0.0):
        raise DomainError("log requires strictly positive input")
    return _record(np.log(x.value), (x,), lambda g: (g / x.value,), "log")


def power(x, exponent: float) -> Tensor:
    x = as_tensor(x)
    p = float(exponent)
    if not p.is_integer() and np.any(x.value < 0.0):
        raise DomainError(f"negative base with non-integer exponent {p}")
    if p < 1.0 and np.any(x.value == 0.0):
        raise DomainError(f"zero base with exponent {p} has no finite derivative")
    out = x.value**p
    return _record(out, (x,), lambda g: (g * p * x.value ** (p - 1.0),), "pow")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    v = x.value
    e = np.exp(-np.abs(v))
    out = np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _record(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def sin(x) -> Tensor:
    x = as_tensor(x)
    return _record(np.sin(x.value), (x,), lambda g: (g * np.cos(x.value),), "sin")


def prelu(x, slope: float = 0.25) -> Tensor:
    x = as_tensor(x)
    positive = x.value > 0
    out = np.where(positive, x.value, slope * x.value)
    return _record(out, (x,), lambda g: (np.where(positive, g, slope * g),), "prelu")


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp values; the gradient is zero wherever the clamp is active."""
    x = as_tensor(x)
    inside = (x.value >= lo) & (x.value <= hi)
    return _record(np.clip(x.value, lo, hi), (x,), lambda g: (g * inside,), "clip")


# --- shape and reductions -------------------------------------------------


def transpose(x) -> Tensor:
    x = as_tensor(x)
    return _record(x.value.T.copy(), (x,), lambda g: (g.T,), "transpose")


def tensor_sum(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        out = np.sum(x.value).reshape(1, 1)
    else:
        out = np.sum(x.value, axis=axis, keepdims=True)
    return _record(out, (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),), "sum")


def tensor_mean(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    count = x.value.size if axis is None else x.shape[axis]
    return tensor_sum(x, axis) * (1.0 / count)


def take_rows(x, index) -> Tensor:
    x = as_tensor(x)
    idx = np.asarray(index, dtype=np.intp)

    def backward(g):
        full = np.zeros_like(x.value)
        np.add.at(full, idx, g)
        return (full,)

    return _record(x.value[idx], (x,), backward, "take_rows")


def rowwise_dot(a, b) -> Tensor:
    return tensor_sum(mul(a, b), axis=1)


def row_l2_normalize(x, floor: float = NORM_FLOOR) -> Tensor:
    """Scale every row onto the unit sphere; rows shorter than ``floor`` are rejected."""
    x = as_tensor(x)
    norms = np.sqrt(np.sum(x.value * x.value, axis=1, keepdims=True))
    if np.any(norms < floor):
        bad = int(np.argmin(norms[:, 0]))
        raise DegenerateInputError(f"row {bad} has norm {norms[bad, 0]:.3g} below {floor}")
    out = x.value / norms

    def backward(g):
        return ((g - out * np.sum(g * out, axis=1, keepdims=True)) / norms,)

    return _record(out, (x,), backward, "row_l2_normalize")


def straight_through(soft, hard_values) -> Tensor:
    """Forward emits ``hard_values``; backward passes the gradient to ``soft`` unchanged."""
    soft = as_tensor(soft)
    hard = _as_array(hard_values)
    if hard.shape != soft.shape:
        raise DimensionError(f"hard values {hard.shape} do not match soft {soft.shape}")
    return _record(hard, (soft,), lambda g: (g,), "straight_through")


# --- finite-difference oracle ---------------------------------------------


def finite_difference(fn: Callable[[], float], array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``fn()`` with respect to ``array`` (perturbed in place)."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = array[i]
        array[i] = orig + h
        up = fn()
        array[i] = orig - h
        down = fn()
        array[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Max absolute difference scaled by the larger of the two gradients' max magnitudes."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)
