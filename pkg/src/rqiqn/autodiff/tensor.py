"""Reverse-mode automatic differentiation over dense float64 arrays.

Small tape-based engine: ops build a graph of `Tensor` nodes, `backward()`
replays the recorded operations in reverse topological order. CPU-only,
single-threaded per graph; graphs are single-use.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


_GRAD_ENABLED = True
_NODE_COUNTER = 0


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (target-network passes)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _next_node_id() -> int:
    global _NODE_COUNTER
    _NODE_COUNTER += 1
    return _NODE_COUNTER


class Tensor:
    """Dense float64 array with an optional gradient buffer and tape node id."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_rule", "_node_id")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_rule: Callable[[np.ndarray], None] | None = None
        self._node_id = _next_node_id() if requires_grad else 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        return float(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar (constants are wrapped, never tracked) --------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ShapeError("division by a tracked Tensor is not supported; multiply by a constant reciprocal")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return mul(self, -1.0)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def reshape(self, shape):
        return reshape(self, shape)

    def backward(self) -> None:
        """Populate gradients of every tracked ancestor of a scalar output.

        The recorded tape is consumed: a graph can be backpropagated once.
        """
        if self.values.size != 1:
            raise ShapeError(f"backward requires a scalar output, got shape {self.shape}")
        tape = Tape.from_output(self)
        self.grad = np.ones_like(self.values)
        for node in tape.reverse_nodes():
            rule = node._backward_rule
            if rule is not None:
                rule(node.grad)
                node._backward_rule = None
                node._parents = ()


class Tape:
    """Recorded operations of one graph, in topological (creation) order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "Tape":
        seen: set[int] = set()
        collected: list[Tensor] = []
        stack = [output]
        while stack:
            node = stack.pop()
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            collected.append(node)
            stack.extend(node._parents)
        collected.sort(key=lambda n: n._node_id)
        return cls(collected)

    def reverse_nodes(self):
        return reversed(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


# -- helpers ----------------------------------------------------------------


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _track(*tensors: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _make_node(values: np.ndarray, parents: tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(values)
    out.requires_grad = True
    out._node_id = _next_node_id()
    out._parents = parents
    out._backward_rule = rule
    return out


def _accumulate(t: Tensor, g: np.ndarray, owned: bool = False) -> None:
    """Add `g` into t.grad; `owned=True` promises `g` is a fresh array the
    caller will not reuse, letting the first accumulation take it directly."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g if owned else np.array(g)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a_shape, b_shape, op: str) -> None:
    try:
        np.broadcast_shapes(a_shape, b_shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a_shape} and {b_shape}") from None


# -- forward ops -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.shape, b.shape, "add")
    values = a.values + b.values
    if not _track(a, b):
        return Tensor(values)

    def rule(g: np.ndarray) -> None:
        ga = _unbroadcast(g, a.shape)
        _accumulate(a, ga, owned=ga is not g)
        gb = _unbroadcast(g, b.shape)
        _accumulate(b, gb, owned=gb is not g)

    return _make_node(values, (a, b), rule)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.shape, b.shape, "sub")
    values = a.values - b.values
    if not _track(a, b):
        return Tensor(values)

    def rule(g: np.ndarray) -> None:
        ga = _unbroadcast(g, a.shape)
        _accumulate(a, ga, owned=ga is not g)
        _accumulate(b, _unbroadcast(-g, b.shape), owned=True)

    return _make_node(values, (a, b), rule)


def mul(a, b) -> Tensor:
    """Hadamard product, with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.shape, b.shape, "hadamard")
    values = a.values * b.values
    if not _track(a, b):
        return Tensor(values)
    av, bv = a.values, b.values

    def rule(g: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(g * bv, a.shape), owned=True)
        _accumulate(b, _unbroadcast(g * av, b.shape), owned=True)

    return _make_node(values, (a, b), rule)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    values = a.values @ b.values
    if not _track(a, b):
        return Tensor(values)
    av, bv = a.values, b.values

    def rule(g: np.ndarray) -> None:
        _accumulate(a, g @ bv.T, owned=True)
        _accumulate(b, av.T @ g, owned=True)

    return _make_node(values, (a, b), rule)


def rectifier(x) -> Tensor:
    """max(x, 0); derivative 0 at exactly 0."""
    x = as_tensor(x)
    values = np.maximum(x.values, 0.0)
    if not _track(x):
        return Tensor(values)
    mask = x.values > 0.0

    def rule(g: np.ndarray) -> None:
        _accumulate(x, g * mask, owned=True)

    return _make_node(values, (x,), rule)


def absolute(x) -> Tensor:
    """|x|; subgradient 0 at exactly 0."""
    x = as_tensor(x)
    values = np.abs(x.values)
    if not _track(x):
        return Tensor(values)
    sign = np.sign(x.values)

    def rule(g: np.ndarray) -> None:
        _accumulate(x, g * sign, owned=True)

    return _make_node(values, (x,), rule)


def huber(x, kappa: float) -> Tensor:
    """Elementwise Huber kernel: u^2/2 inside |u| <= kappa, linear outside."""
    if kappa <= 0:
        raise ValueError(f"huber threshold must be positive, got {kappa}")
    x = as_tensor(x)
    xv = x.values
    absx = np.abs(xv)
    values = np.where(absx <= kappa, 0.5 * xv * xv, kappa * (absx - 0.5 * kappa))
    if not _track(x):
        return Tensor(values)
    slope = np.clip(xv, -kappa, kappa)

    def rule(g: np.ndarray) -> None:
        _accumulate(x, g * slope, owned=True)

    return _make_node(values, (x,), rule)


def tsum(x) -> Tensor:
    x = as_tensor(x)
    values = np.asarray(x.values.sum())
    if not _track(x):
        return Tensor(values)
    shape = x.shape

    def rule(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g, shape))

    return _make_node(values, (x,), rule)


def tmean(x) -> Tensor:
    x = as_tensor(x)
    values = np.asarray(x.values.mean())
    if not _track(x):
        return Tensor(values)
    shape = x.shape
    inv_n = 1.0 / x.values.size

    def rule(g: np.ndarray) -> None:
        _accumulate(x, np.broadcast_to(g * inv_n, shape))

    return _make_node(values, (x,), rule)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    values = x.values.reshape(shape)
    if not _track(x):
        return Tensor(values)
    old_shape = x.shape

    def rule(g: np.ndarray) -> None:
        _accumulate(x, g.reshape(old_shape))

    return _make_node(values, (x,), rule)


def pick(x, index) -> Tensor:
    """Select one column per row: out[r] = x[r, index[r]]."""
    x = as_tensor(x)
    idx = np.asarray(index, dtype=np.intp)
    if x.values.ndim != 2 or idx.ndim != 1 or idx.shape[0] != x.shape[0]:
        raise ShapeError(f"pick: values {x.shape} incompatible with index {idx.shape}")
    rows = np.arange(x.shape[0])
    values = x.values[rows, idx]
    if not _track(x):
        return Tensor(values)
    in_shape = x.shape

    def rule(g: np.ndarray) -> None:
        gx = np.zeros(in_shape)
        gx[rows, idx] = g
        _accumulate(x, gx, owned=True)

    return _make_node(values, (x,), rule)


def cosine_basis(tau, n: int) -> Tensor:
    """Cosine feature expansion of fractions: [cos(pi * i * tau)] for i = 0..n-1.

    `tau` may be a scalar or a 1-D array of fractions; output gains a trailing
    axis of length n.
    """
    if n < 1:
        raise ShapeError(f"cosine_basis: basis size must be >= 1, got {n}")
    tau = as_tensor(tau)
    i = np.arange(n, dtype=np.float64)
    angles = np.pi * np.multiply.outer(tau.values, i)
    values = np.cos(angles)
    if not _track(tau):
        return Tensor(values)
    dvalues = -np.pi * i * np.sin(angles)

    def rule(g: np.ndarray) -> None:
        _accumulate(tau, (g * dvalues).sum(axis=-1), owned=True)

    return _make_node(values, (tau,), rule)
