"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable op records its parents and a closure mapping the
upstream gradient to one gradient per parent. The graph lives only as long
as the tensors referencing it; :func:`backward` walks it once in reverse
topological order.

Broadcasting is deliberately narrow: two operands combine only when the
shape of one is a trailing suffix of the other's (missing leading axes are
broadcast). Anything else is a :class:`ShapeError`.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DeterminismError, RangeError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Run ops without recording a graph."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, op: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if any(n < 1 for n in arr.shape):
            raise ShapeError(f"invalid shape {arr.shape}: every extent must be >= 1")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = tuple(_parents)
        self._backward = _backward
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise RangeError(f"expected a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def backward(self, leaves: Iterable["Tensor"] | None = None) -> None:
        backward(self, leaves)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only supported by a Python scalar")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward_fn, op=op)
    return Tensor(data)


# ---------------------------------------------------------------------------
# allocation


def alloc(
    shape: Sequence[int],
    init: str = "zeros",
    rng: np.random.Generator | None = None,
    *,
    low: float = -1.0,
    high: float = 1.0,
    fan_in: int | None = None,
    requires_grad: bool = False,
) -> Tensor:
    """Allocate a tensor.

    ``init`` is one of ``"zeros"``, ``"ones"``, ``"uniform"`` (on
    ``[low, high)``) or ``"scaled_uniform"`` (on ``±1/sqrt(fan_in)``).
    Random inits need ``rng``; the draw is fully determined by its state.
    """
    shape = tuple(int(n) for n in shape)
    if any(n < 1 for n in shape):
        raise ShapeError(f"invalid shape {shape}: every extent must be >= 1")
    if init == "zeros":
        data = np.zeros(shape)
    elif init == "ones":
        data = np.ones(shape)
    elif init in ("uniform", "scaled_uniform"):
        if rng is None:
            raise ValueError(f"init {init!r} needs an rng")
        if init == "scaled_uniform":
            if fan_in is None or fan_in < 1:
                raise ValueError("scaled_uniform needs fan_in >= 1")
            high = 1.0 / np.sqrt(fan_in)
            low = -high
        data = rng.uniform(low, high, size=shape)
    else:
        raise ValueError(f"unknown init {init!r}")
    return Tensor(data, requires_grad=requires_grad)


# ---------------------------------------------------------------------------
# broadcasting helpers


def _suffix_shape(a: tuple, b: tuple, op: str) -> None:
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    if long_[len(long_) - len(short):] != short:
        raise ShapeError(f"{op}: shapes {a} and {b} are not conformable")


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


# ---------------------------------------------------------------------------
# elementwise kernels


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_shape(a.shape, b.shape, "add")

    def bw(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return _result(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_shape(a.shape, b.shape, "sub")

    def bw(g):
        return _reduce_to(g, a.shape), -_reduce_to(g, b.shape)

    return _result(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_shape(a.shape, b.shape, "mul")

    def bw(g):
        return _reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), bw, "mul")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log; inputs below ``floor`` are clamped and pass no gradient."""
    x = a.data
    if floor > 0.0:
        live = x > floor
        safe = np.where(live, x, floor)
    else:
        live = np.ones(x.shape, dtype=bool)
        safe = x
    out = np.log(safe)

    def bw(g):
        return (np.where(live, g / safe, 0.0),)

    return _result(out, (a,), bw, "log")


def masked_fill(a: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is True by a constant."""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    out = np.where(mask, value, a.data)
    return _result(out, (a,), lambda g: (np.where(mask, 0.0, g),), "masked_fill")


# ---------------------------------------------------------------------------
# linear algebra and shape kernels


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, batched over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner extents differ for {a.shape} and {b.shape}")
    _suffix_shape(a.shape[:-2], b.shape[:-2], "matmul")

    def bw(g):
        ga = _reduce_to(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _reduce_to(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _result(a.data @ b.data, (a, b), bw, "matmul")


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise ShapeError(f"transpose: needs rank >= 2, got {a.shape}")
    return _result(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from exc
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def _axis(axis: int, ndim: int, op: str) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"{op}: axis {axis} out of range for rank {ndim}")
    return axis % ndim


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: nothing to concatenate")
    ax = _axis(axis, tensors[0].ndim, "concat")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or t.shape[:ax] + t.shape[ax + 1:] != ref[:ax] + ref[ax + 1:]:
            raise ShapeError(f"concat: shapes {ref} and {t.shape} differ off axis {axis}")
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _result(np.concatenate([t.data for t in tensors], axis=ax), tensors, bw, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != ref:
            raise ShapeError(f"stack: shapes {ref} and {t.shape} differ")
    ax = _axis(axis, len(ref) + 1, "stack")

    def bw(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(tensors)))

    return _result(np.stack([t.data for t in tensors], axis=ax), tensors, bw, "stack")


def slice(a: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:  # noqa: A001
    """Half-open range ``[start, stop)`` along ``axis``; the axis is kept."""
    ax = _axis(axis, a.ndim, "slice")
    n = a.shape[ax]
    if not 0 <= start < stop <= n:
        raise ShapeError(f"slice: range [{start}, {stop}) invalid for extent {n} of {a.shape}")
    idx = (np.s_[:],) * ax + (np.s_[start:stop],)

    def bw(g):
        out = np.zeros(a.shape)
        out[idx] = g
        return (out,)

    return _result(a.data[idx], (a,), bw, "slice")


def select(a: Tensor, index: int, axis: int = 0) -> Tensor:
    """Pick one position along ``axis`` and drop that axis."""
    ax = _axis(axis, a.ndim, "select")
    if not 0 <= index < a.shape[ax]:
        raise ShapeError(f"select: index {index} out of range for {a.shape}")
    idx = (np.s_[:],) * ax + (index,)

    def bw(g):
        out = np.zeros(a.shape)
        out[idx] = g
        return (out,)

    return _result(a.data[idx], (a,), bw, "select")


def sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    if axis is None:
        out = np.asarray(a.data.sum())

        def bw(g):
            return (np.broadcast_to(g, a.shape).copy(),)

        return _result(out, (a,), bw, "sum")
    ax = _axis(axis, a.ndim, "sum")
    out = a.data.sum(axis=ax, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(out, (a,), bw, "sum")


def mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.shape[_axis(axis, a.ndim, "mean")]
    return mul(sum(a, axis, keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# graph traversal


class Graph:
    """Topologically ordered record of the ops reachable from a root."""

    def __init__(self, root: Tensor):
        order: list[Tensor] = []
        seen: set[int] = set()
        stack_: list[tuple[Tensor, bool]] = [(root, False)]
        while stack_:
            node, expanded = stack_.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack_.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack_.append((p, False))
        self.root = root
        self.nodes = order

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n.is_leaf]


def backward(root: Tensor, leaves: Iterable[Tensor] | None = None) -> None:
    """Populate ``.grad`` on every leaf that ``root`` depends on.

    Leaf gradients are overwritten, not accumulated. Tensors passed in
    ``leaves`` that the root does not reach get a zero gradient.
    """
    if root.data.size != 1:
        raise RangeError(f"backward needs a scalar root, got shape {root.shape}")
    graph = Graph(root)
    grads: dict[int, np.ndarray] = {id(root): np.ones(root.shape)}
    for node in reversed(graph.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    if leaves is not None:
        reached = {id(n) for n in graph.nodes}
        for leaf in leaves:
            if id(leaf) not in reached:
                leaf.grad = np.zeros(leaf.shape)


def finite_diff_check(f: Callable[[list[Tensor]], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    The error for one entry is ``|g_analytic - g_fd| / max(1, |g_fd|)``.
    ``f`` must be deterministic; it is evaluated twice up front to make sure.
    """
    if not h > 0:
        raise DeterminismError(f"finite-difference step must be positive, got {h}")
    params = list(params)
    for p in params:
        p.grad = None
    root = f(params)
    with no_grad():
        again = f(params).data
    if not np.array_equal(root.data, again):
        raise DeterminismError("objective is not deterministic; disable dropout/stochastic mode")
    backward(root, params)
    worst = 0.0
    with no_grad():
        for p in params:
            for i in np.ndindex(p.shape):
                orig = p.data[i]
                p.data[i] = orig + h
                up = f(params).item()
                p.data[i] = orig - h
                down = f(params).item()
                p.data[i] = orig
                fd = (up - down) / (2.0 * h)
                worst = max(worst, abs(p.grad[i] - fd) / max(1.0, abs(fd)))
    return worst
