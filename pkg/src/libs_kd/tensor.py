"""Dense real tensors with dynamically built reverse-mode differentiation.

Every operation builds the graph as it runs (define-by-run); a graph lives
for one forward/backward pass and is rebuilt per training step. Rules:

- no broadcasting: binary elementwise ops require identical shapes, and the
  only scalar shortcut is multiplication by a plain Python number;
- arrays are float32 or float64 and keep their dtype through every op;
- a node's gradient is populated by ``backward`` only if the node requires
  gradients (directly or through an ancestor); everything else stays None.

A graph and its nodes belong to one thread during construction and
backward. Detached tensors (``requires_grad=False``, no parents) are
immutable by convention and safe to share.
"""

from __future__ import annotations

import contextlib
import numbers
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DomainError, ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A value in the computation graph.

    ``data`` is a row-major numpy array; ``grad`` is filled by ``backward``
    with an array of the same shape, or left None if no gradient reaches
    this node.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return scale(self, other)
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    """Wrap an op result, attaching the graph only when gradients are on."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes differ: {a.shape} vs {b.shape}")


# -- arithmetic --------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("add", a, b)
    out = _make(a.data + b.data, (a, b), None)

    def bw():
        if a.requires_grad:
            a.grad += out.grad
        if b.requires_grad:
            b.grad += out.grad

    out._backward = bw if out.requires_grad else None
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("sub", a, b)
    out = _make(a.data - b.data, (a, b), None)

    def bw():
        if a.requires_grad:
            a.grad += out.grad
        if b.requires_grad:
            b.grad -= out.grad

    out._backward = bw if out.requires_grad else None
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("mul", a, b)
    out = _make(a.data * b.data, (a, b), None)

    def bw():
        if a.requires_grad:
            a.grad += b.data * out.grad
        if b.requires_grad:
            b.grad += a.data * out.grad

    out._backward = bw if out.requires_grad else None
    return out


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a plain number (constant, receives no gradient)."""
    c = float(c)
    out = _make(a.data * c, (a,), None)

    def bw():
        a.grad += c * out.grad

    out._backward = bw if out.requires_grad else None
    return out


def add_n(xs: Sequence[Tensor]) -> Tensor:
    """Sum of same-shaped tensors as a single node."""
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise DomainError("add_n: empty input list")
    for x in xs[1:]:
        _check_same_shape("add_n", xs[0], x)
    total = xs[0].data.copy()
    for x in xs[1:]:
        total += x.data
    out = _make(total, xs, None)

    def bw():
        for x in xs:
            if x.requires_grad:
                x.grad += out.grad

    out._backward = bw if out.requires_grad else None
    return out


def matmul(a, b) -> Tensor:
    """Matrix product for 2-D/2-D, 1-D/2-D, 2-D/1-D and 1-D/1-D operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: rank must be 1 or 2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree: {a.shape} @ {b.shape}")
    out = _make(a.data @ b.data, (a, b), None)

    def bw():
        g = out.grad
        ad, bd = a.data, b.data
        if a.requires_grad:
            if ad.ndim == 2 and bd.ndim == 2:
                a.grad += g @ bd.T
            elif ad.ndim == 2:  # 2D @ 1D
                a.grad += np.outer(g, bd)
            elif bd.ndim == 2:  # 1D @ 2D
                a.grad += bd @ g
            else:  # 1D @ 1D
                a.grad += g * bd
        if b.requires_grad:
            if ad.ndim == 2 and bd.ndim == 2:
                b.grad += ad.T @ g
            elif ad.ndim == 2:
                b.grad += ad.T @ g
            elif bd.ndim == 2:
                b.grad += np.outer(ad, g)
            else:
                b.grad += g * ad

    out._backward = bw if out.requires_grad else None
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: need a matrix, got shape {a.shape}")
    out = _make(a.data.T, (a,), None)

    def bw():
        a.grad += out.grad.T

    out._backward = bw if out.requires_grad else None
    return out


# -- nonlinearities ----------------------------------------------------------


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = _make(y, (a,), None)

    def bw():
        a.grad += (1.0 - y * y) * out.grad

    out._backward = bw if out.requires_grad else None
    return out


def sigmoid(a: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    y = y.astype(x.dtype, copy=False)
    out = _make(y, (a,), None)

    def bw():
        a.grad += y * (1.0 - y) * out.grad

    out._backward = bw if out.requires_grad else None
    return out


def log(a: Tensor) -> Tensor:
    out = _make(np.log(a.data), (a,), None)

    def bw():
        a.grad += out.grad / a.data

    out._backward = bw if out.requires_grad else None
    return out


def softmax(a: Tensor) -> Tensor:
    """Softmax of a vector, computed with max subtraction."""
    if a.data.ndim != 1:
        raise ShapeError(f"softmax: need a vector, got shape {a.shape}")
    if a.data.size == 0:
        raise DomainError("softmax: empty input")
    e = np.exp(a.data - a.data.max())
    y = e / e.sum()
    out = _make(y, (a,), None)

    def bw():
        g = out.grad
        a.grad += y * (g - g @ y)

    out._backward = bw if out.requires_grad else None
    return out


def log_softmax(a: Tensor) -> Tensor:
    """log(softmax(x)) of a vector, in one numerically stable node."""
    if a.data.ndim != 1:
        raise ShapeError(f"log_softmax: need a vector, got shape {a.shape}")
    if a.data.size == 0:
        raise DomainError("log_softmax: empty input")
    shifted = a.data - a.data.max()
    lse = np.log(np.exp(shifted).sum())
    y = shifted - lse
    out = _make(y, (a,), None)

    def bw():
        g = out.grad
        a.grad += g - np.exp(y) * g.sum()

    out._backward = bw if out.requires_grad else None
    return out


# -- reshaping / indexing ----------------------------------------------------


def concat(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate vectors into one vector."""
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise DomainError("concat: empty input list")
    for x in xs:
        if x.data.ndim != 1:
            raise ShapeError(f"concat: need vectors, got shape {x.shape}")
    out = _make(np.concatenate([x.data for x in xs]), xs, None)

    def bw():
        off = 0
        for x in xs:
            n = x.data.shape[0]
            if x.requires_grad:
                x.grad += out.grad[off:off + n]
            off += n

    out._backward = bw if out.requires_grad else None
    return out


def stack_rows(xs: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one vector per row."""
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise DomainError("stack_rows: empty input list")
    for x in xs:
        if x.data.ndim != 1 or x.shape != xs[0].shape:
            raise ShapeError(f"stack_rows: need equal-length vectors, got {x.shape}")
    out = _make(np.stack([x.data for x in xs]), xs, None)

    def bw():
        for i, x in enumerate(xs):
            if x.requires_grad:
                x.grad += out.grad[i]

    out._backward = bw if out.requires_grad else None
    return out


def stack_scalars(xs: Sequence[Tensor]) -> Tensor:
    """Collect scalars into a vector."""
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise DomainError("stack_scalars: empty input list")
    for x in xs:
        if x.data.ndim != 0:
            raise ShapeError(f"stack_scalars: need scalars, got shape {x.shape}")
    out = _make(np.stack([x.data for x in xs]), xs, None)

    def bw():
        for i, x in enumerate(xs):
            if x.requires_grad:
                x.grad += out.grad[i]

    out._backward = bw if out.requires_grad else None
    return out


def row(a: Tensor, i: int) -> Tensor:
    """Row i of a matrix as a vector (embedding-style lookup)."""
    if a.data.ndim != 2:
        raise ShapeError(f"row: need a matrix, got shape {a.shape}")
    if not 0 <= i < a.shape[0]:
        raise ContractError(f"row: index {i} out of range for shape {a.shape}")
    out = _make(a.data[i], (a,), None)

    def bw():
        a.grad[i] += out.grad

    out._backward = bw if out.requires_grad else None
    return out


def pick(a: Tensor, i: int) -> Tensor:
    """Element i of a vector as a scalar."""
    if a.data.ndim != 1:
        raise ShapeError(f"pick: need a vector, got shape {a.shape}")
    if not 0 <= i < a.shape[0]:
        raise ContractError(f"pick: index {i} out of range for shape {a.shape}")
    out = _make(a.data[i], (a,), None)

    def bw():
        a.grad[i] += out.grad

    out._backward = bw if out.requires_grad else None
    return out


# -- losses ------------------------------------------------------------------


def sq_l2(a, b) -> Tensor:
    """Squared L2 distance between same-shaped tensors, as a scalar."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_shape("sq_l2", a, b)
    d = a.data - b.data
    out = _make(np.asarray((d * d).sum(), dtype=a.data.dtype), (a, b), None)

    def bw():
        g = 2.0 * out.grad
        if a.requires_grad:
            a.grad += g * d
        if b.requires_grad:
            b.grad -= g * d

    out._backward = bw if out.requires_grad else None
    return out


# -- backward pass -----------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate ``grad`` for every gradient-tracked ancestor of ``loss``.

    The loss must be scalar. Gradients of reachable nodes are reset to zero
    first, so repeated calls never double-accumulate; two runs over the same
    graph produce bit-identical gradients.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    for node in topo:
        node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()
