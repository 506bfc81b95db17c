"""Reverse-mode automatic differentiation over dense float64 arrays.

Every forward computation in this package is built from the small primitive
set below; :func:`backward` then returns exact gradients of a scalar output
with respect to any set of parameter leaves.  The engine is deliberately
minimal: float64 only, no views, no graph rewriting, and only as much
broadcasting as the forecasting pipeline actually uses (element-wise
primitives accept numpy-broadcastable operands and reduce gradients back to
each operand's shape).

Graphs are acyclic by construction (a node only ever references nodes that
already exist).  A :func:`detach` node forwards its value but is constant to
the backward pass, so parameters reachable only through it receive exactly
zero gradient.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    """Operand shapes do not conform for a primitive."""


class Value:
    """A node in the computation graph.

    Holds the forward value (float64 ndarray), the primitive kind that
    produced it, references to parent nodes and, for differentiable interior
    nodes, a closure mapping the output adjoint to per-parent adjoints.
    Constant subgraphs (no parent requires grad) carry no closure and are
    never visited by the backward pass.
    """

    __slots__ = ("data", "op", "parents", "requires_grad", "_backward")

    def __init__(
        self,
        data,
        op: str = "leaf",
        parents: tuple["Value", ...] = (),
        requires_grad: bool = False,
        backward: Callable | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        return f"Value(op={self.op!r}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars are folded in via scalar_affine
    def __add__(self, other):
        if isinstance(other, Value):
            return add(self, other)
        return scalar_affine(self, 1.0, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Value):
            return sub(self, other)
        return scalar_affine(self, 1.0, -float(other))

    def __mul__(self, other):
        if isinstance(other, Value):
            return mul(self, other)
        return scalar_affine(self, float(other), 0.0)

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_affine(self, -1.0, 0.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return vslice(self, key)

    def argmin(self, axis: int) -> np.ndarray:
        """Index of the minimum along ``axis`` (ties to the lowest index).

        Returns plain integers; this is the one primitive that is not
        differentiable, by design.
        """
        return np.argmin(self.data, axis=axis)


def constant(data) -> Value:
    """Wrap an array as a graph constant (no gradient)."""
    return Value(data, op="leaf")


def param(data) -> Value:
    """Wrap an array as a trainable leaf."""
    return Value(data, op="leaf", requires_grad=True)


def _any_grad(*vs: Value) -> bool:
    return any(v.requires_grad for v in vs)


def _node(data, op, parents, backward) -> Value:
    if _any_grad(*parents):
        return Value(data, op=op, parents=tuple(parents), requires_grad=True, backward=backward)
    return Value(data, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Value, b: Value) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# element-wise primitives


def add(a: Value, b: Value) -> Value:
    _check_broadcast("add", a, b)
    return _node(
        a.data + b.data,
        "add",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Value, b: Value) -> Value:
    _check_broadcast("sub", a, b)
    return _node(
        a.data - b.data,
        "sub",
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Value, b: Value) -> Value:
    _check_broadcast("mul", a, b)
    return _node(
        a.data * b.data,
        "mul",
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scalar_affine(v: Value, scale: float, shift: float) -> Value:
    """``scale * v + shift`` with plain-float coefficients."""
    scale = float(scale)
    return _node(scale * v.data + float(shift), "affine", (v,), lambda g: (scale * g,))


def relu(v: Value) -> Value:
    return _node(np.maximum(v.data, 0.0), "relu", (v,), lambda g: (g * (v.data > 0.0),))


def log(v: Value) -> Value:
    """Natural log; callers are responsible for keeping inputs positive."""
    return _node(np.log(v.data), "log", (v,), lambda g: (g / v.data,))


def sigmoid(v: Value) -> Value:
    x = v.data
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _node(out, "sigmoid", (v,), lambda g: (g * out * (1.0 - out),))


def clamp_min(v: Value, floor: float) -> Value:
    """``max(v, floor)`` composed from in-set primitives (relu + affine)."""
    return scalar_affine(relu(scalar_affine(v, 1.0, -floor)), 1.0, floor)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Value, b: Value) -> Value:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul: operands must be at least 2-d, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")

    def bwd(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _node(np.matmul(a.data, b.data), "matmul", (a, b), bwd)


def transpose(v: Value, axes: Sequence[int]) -> Value:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _node(np.transpose(v.data, axes), "transpose", (v,), lambda g: (np.transpose(g, inv),))


def reshape(v: Value, shape: Sequence[int]) -> Value:
    shape = tuple(shape)
    return _node(v.data.reshape(shape), "reshape", (v,), lambda g: (g.reshape(v.shape),))


def concat(vs: Sequence[Value], axis: int) -> Value:
    vs = tuple(vs)
    base = vs[0].shape
    for v in vs[1:]:
        if len(v.shape) != len(base) or any(
            v.shape[i] != base[i] for i in range(len(base)) if i != axis % len(base)
        ):
            raise ShapeMismatch(f"concat: shapes {[v.shape for v in vs]} differ off axis {axis}")
    sizes = [v.shape[axis] for v in vs]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(np.concatenate([v.data for v in vs], axis=axis), "concat", vs, bwd)


# ---------------------------------------------------------------------------
# reductions


def vsum(v: Value, axis: int | None = None, keepdims: bool = False) -> Value:
    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, v.shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, v.shape).copy(),)

    return _node(v.data.sum(axis=axis, keepdims=keepdims), "sum", (v,), bwd)


def vmean(v: Value, axis: int | None = None, keepdims: bool = False) -> Value:
    n = v.data.size if axis is None else v.shape[axis]

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / n, v.shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk / n, v.shape).copy(),)

    return _node(v.data.mean(axis=axis, keepdims=keepdims), "mean", (v,), bwd)


def vmin(v: Value, axis: int) -> Value:
    """Min over ``axis``; the subgradient routes to the first minimiser."""
    idx = np.argmin(v.data, axis=axis)

    def bwd(g):
        out = np.zeros_like(v.data)
        _scatter_add_along_axis(out, np.expand_dims(idx, axis), axis, np.expand_dims(g, axis))
        return (out,)

    return _node(np.min(v.data, axis=axis), "min", (v,), bwd)


def softmax(v: Value) -> Value:
    """Softmax over the last axis (numerically stabilised)."""
    z = v.data - v.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, "softmax", (v,), bwd)


def l2norm(v: Value, keepdims: bool = False) -> Value:
    """Euclidean norm over the last axis.

    The gradient at an exactly-zero vector is taken to be zero.
    """
    n = np.sqrt((v.data * v.data).sum(axis=-1, keepdims=True))

    def bwd(g):
        gk = g if keepdims else np.expand_dims(g, -1)
        safe = np.where(n == 0.0, 1.0, n)
        return (gk * v.data / safe,)

    out = n if keepdims else n[..., 0]
    return _node(out, "l2norm", (v,), bwd)


# ---------------------------------------------------------------------------
# indexing


def vslice(v: Value, key) -> Value:
    """Basic (non-array) indexing; the gradient scatters back into zeros."""

    def bwd(g):
        out = np.zeros_like(v.data)
        out[key] = g
        return (out,)

    return _node(v.data[key], "slice", (v,), bwd)


def _scatter_add_along_axis(out: np.ndarray, indices: np.ndarray, axis: int, updates: np.ndarray) -> None:
    ax = axis % out.ndim
    grid = list(np.ogrid[tuple(slice(n) for n in indices.shape)])
    grid[ax] = indices
    np.add.at(out, tuple(grid), updates)


def take_along(v: Value, indices: np.ndarray, axis: int) -> Value:
    """Integer-index form of the slice primitive (like ``np.take_along_axis``)."""
    indices = np.asarray(indices)

    def bwd(g):
        out = np.zeros_like(v.data)
        _scatter_add_along_axis(out, indices, axis, g)
        return (out,)

    return _node(np.take_along_axis(v.data, indices, axis=axis), "take_along", (v,), bwd)


def detach(v: Value) -> Value:
    """Forward the value, contribute exactly zero to upstream gradients."""
    return Value(v.data, op="detach", parents=(v,))


# ---------------------------------------------------------------------------
# backward pass


def _toposort(root: Value) -> list[Value]:
    order: list[Value] = []
    seen: set[int] = set()
    stack: list[tuple[Value, int]] = [(root, 0)]
    while stack:
        node, i = stack.pop()
        if i == 0:
            if id(node) in seen:
                continue
            seen.add(id(node))
        advanced = False
        for j in range(i, len(node.parents)):
            p = node.parents[j]
            if p.requires_grad and id(p) not in seen:
                stack.append((node, j + 1))
                stack.append((p, 0))
                advanced = True
                break
        if not advanced:
            order.append(node)
    return order


def backward(root: Value, params: Iterable[Value] | None = None) -> dict[Value, np.ndarray]:
    """Accumulate d(root)/d(leaf) for every requires-grad leaf.

    ``root`` must be scalar-valued.  When ``params`` is given, the returned
    map covers exactly those nodes, with all-zero arrays for parameters the
    graph never reaches (e.g. behind a detach).  Accumulation order is the
    deterministic reverse topological order of construction, so repeated
    calls produce bitwise-identical gradients.
    """
    if root.data.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")
    adjoint: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    leaves: dict[int, tuple[Value, np.ndarray]] = {}
    if root.requires_grad:
        for node in reversed(_toposort(root)):
            g = adjoint.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                leaves[id(node)] = (node, g)
                continue
            for p, pg in zip(node.parents, node._backward(g)):
                if not p.requires_grad:
                    continue
                acc = adjoint.get(id(p))
                adjoint[id(p)] = pg.copy() if acc is None else acc + pg
    if params is None:
        return {node: g for node, g in leaves.values()}
    out: dict[Value, np.ndarray] = {}
    for p in params:
        found = leaves.get(id(p))
        out[p] = found[1] if found is not None else np.zeros_like(p.data)
    return out


def grad_check(
    f: Callable[[], Value],
    params: Mapping[str, Value] | Sequence[Value],
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` rebuilds its graph from the same parameter leaves on every call;
    parameter data is perturbed in place and restored.  The error for each
    entry is ``|analytic - central| / (|central| + 1e-8)``.
    """
    plist = list(params.values()) if isinstance(params, Mapping) else list(params)
    grads = backward(f(), plist)
    worst = 0.0
    for p in plist:
        analytic = grads[p].reshape(-1)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = float(f().data)
            flat[i] = orig - step
            fm = float(f().data)
            flat[i] = orig
            central = (fp - fm) / (2.0 * step)
            err = abs(analytic[i] - central) / (abs(central) + 1e-8)
            if err > worst:
                worst = err
    return worst
