"""Reverse-mode automatic differentiation over dense float64 arrays.

A compute graph is built eagerly: every operation validates shapes, evaluates
immediately with numpy, and records a vector-Jacobian product (vjp) closure.
The vjp closures themselves build graph nodes, so gradients are differentiable
and second-order quantities (gradients of functions of gradients) come out of
the same machinery.

Evaluation is deterministic: identical leaf bindings always produce bitwise
identical values. Graphs are cheap, throwaway objects — callers rebuild them
for every batch rather than mutating leaf values in place.

The functional Adam optimizer lives here too, next to the gradients it consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, OptimizerError

Array = np.ndarray


class Node:
    """One array-valued vertex of a compute graph.

    ``requires`` marks whether any leaf below this node wants gradients; the
    backward pass never descends into subgraphs where it is False, which is
    also how ``stop_gradient`` works.
    """

    __slots__ = ("value", "parents", "vjp", "requires", "name")

    def __init__(self, value, parents=(), vjp=None, requires=False, name=""):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self.vjp = vjp
        self.requires = bool(requires) or any(p.requires for p in self.parents)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = self.name or "node"
        return f"<{tag} shape={self.value.shape} requires={self.requires}>"


def leaf(value, name: str = "leaf") -> Node:
    """A differentiable input of the graph."""
    return Node(value, requires=True, name=name)


def const(value, name: str = "const") -> Node:
    """A constant input; gradients never flow into it."""
    return Node(value, name=name)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else const(x)


def stop_gradient(x: Node, name: str = "stop") -> Node:
    """Same value as ``x`` but detached: contributes zero upstream gradient."""
    return Node(as_node(x).value, name=name)


def _check(cond: bool, op: str, msg: str, *nodes: Node) -> None:
    if not cond:
        names = ", ".join(n.name or "?" for n in nodes)
        raise EvaluationError(f"{op}: {msg} (operands: {names})")


# ---------------------------------------------------------------------------
# broadcasting helpers


def _unbroadcast(g: Node, shape: tuple[int, ...]) -> Node:
    """Reduce a gradient with a broadcast shape back to ``shape``."""
    if g.value.shape == shape:
        return g
    extra = g.value.ndim - len(shape)
    if extra > 0:
        g = sum_axes(g, tuple(range(extra)))
    squeeze = tuple(i for i, n in enumerate(shape) if n == 1 and g.value.shape[i] != 1)
    if squeeze:
        g = sum_axes(g, squeeze, keepdims=True)
    if g.value.shape != shape:
        g = reshape(g, shape)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    try:
        out_v = a.value + b.value
    except ValueError as exc:
        raise EvaluationError(
            f"add: incompatible shapes {a.value.shape} + {b.value.shape} "
            f"(operands: {a.name}, {b.name})"
        ) from exc

    def vjp(g: Node):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return Node(out_v, (a, b), vjp, name="add")


def sub(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    try:
        out_v = a.value - b.value
    except ValueError as exc:
        raise EvaluationError(
            f"sub: incompatible shapes {a.value.shape} - {b.value.shape} "
            f"(operands: {a.name}, {b.name})"
        ) from exc

    def vjp(g: Node):
        return _unbroadcast(g, a.value.shape), _unbroadcast(neg(g), b.value.shape)

    return Node(out_v, (a, b), vjp, name="sub")


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    try:
        out_v = a.value * b.value
    except ValueError as exc:
        raise EvaluationError(
            f"mul: incompatible shapes {a.value.shape} * {b.value.shape} "
            f"(operands: {a.name}, {b.name})"
        ) from exc

    def vjp(g: Node):
        return _unbroadcast(mul(g, b), a.value.shape), _unbroadcast(mul(g, a), b.value.shape)

    return Node(out_v, (a, b), vjp, name="mul")


def neg(a) -> Node:
    return mul(a, const(-1.0, name="-1"))


def square(a) -> Node:
    a = as_node(a)

    def vjp(g: Node):
        return (mul(g, mul(const(2.0), a)),)

    return Node(a.value * a.value, (a,), vjp, name="square")


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a) -> Node:
    a = as_node(a)
    mask = (a.value > 0.0).astype(np.float64)

    def vjp(g: Node):
        return (mul(g, const(mask, name="relu-mask")),)

    return Node(a.value * mask, (a,), vjp, name="relu")


def softplus(a) -> Node:
    a = as_node(a)
    out = Node(np.logaddexp(0.0, a.value), (a,), None, name="softplus")

    def vjp(g: Node):
        # d/dx log(1+e^x) = sigmoid(x) = exp(x - softplus(x))
        return (mul(g, exp(sub(a, out))),)

    out.vjp = vjp
    return out


def exp(a) -> Node:
    a = as_node(a)
    out = Node(np.exp(a.value), (a,), None, name="exp")

    def vjp(g: Node):
        return (mul(g, out),)

    out.vjp = vjp
    return out


def sin(a) -> Node:
    a = as_node(a)

    def vjp(g: Node):
        return (mul(g, cos(a)),)

    return Node(np.sin(a.value), (a,), vjp, name="sin")


def cos(a) -> Node:
    a = as_node(a)

    def vjp(g: Node):
        return (neg(mul(g, sin(a))),)

    return Node(np.cos(a.value), (a,), vjp, name="cos")


def softmax(a) -> Node:
    """Numerically stable softmax over the last axis."""
    a = as_node(a)
    _check(a.value.ndim >= 1, "softmax", "needs at least one axis", a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = Node(e / e.sum(axis=-1, keepdims=True), (a,), None, name="softmax")

    def vjp(g: Node):
        inner = sum_axes(mul(g, out), (-1,), keepdims=True)
        return (mul(out, sub(g, inner)),)

    out.vjp = vjp
    return out


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_axes(a, axes: tuple[int, ...], keepdims: bool = False) -> Node:
    a = as_node(a)
    axes = tuple(ax % a.value.ndim for ax in axes)
    _check(len(set(axes)) == len(axes), "sum", "duplicate axes", a)

    def vjp(g: Node):
        gv = g
        if not keepdims:
            kshape = tuple(
                1 if i in axes else n for i, n in enumerate(a.value.shape)
            )
            gv = reshape(gv, kshape)
        return (broadcast_to(gv, a.value.shape),)

    return Node(a.value.sum(axis=axes, keepdims=keepdims), (a,), vjp, name="sum")


def mean_axes(a, axes: tuple[int, ...], keepdims: bool = False) -> Node:
    a = as_node(a)
    axes_n = tuple(ax % a.value.ndim for ax in axes)
    count = 1
    for ax in axes_n:
        count *= a.value.shape[ax]
    _check(count > 0, "mean", "empty reduction", a)
    return mul(sum_axes(a, axes_n, keepdims=keepdims), const(1.0 / count, name="1/n"))


def broadcast_to(a, shape: tuple[int, ...]) -> Node:
    a = as_node(a)
    try:
        out_v = np.broadcast_to(a.value, shape).copy()
    except ValueError as exc:
        raise EvaluationError(
            f"broadcast: cannot broadcast {a.value.shape} to {shape} (operand: {a.name})"
        ) from exc

    def vjp(g: Node):
        return (_unbroadcast(g, a.value.shape),)

    return Node(out_v, (a,), vjp, name="broadcast")


def reshape(a, shape: tuple[int, ...]) -> Node:
    a = as_node(a)
    try:
        out_v = a.value.reshape(shape)
    except ValueError as exc:
        raise EvaluationError(
            f"reshape: cannot reshape {a.value.shape} to {shape} (operand: {a.name})"
        ) from exc

    def vjp(g: Node):
        return (reshape(g, a.value.shape),)

    return Node(out_v, (a,), vjp, name="reshape")


def transpose_last(a) -> Node:
    """Swap the last two axes."""
    a = as_node(a)
    _check(a.value.ndim >= 2, "transpose", "needs at least two axes", a)

    def vjp(g: Node):
        return (transpose_last(g),)

    return Node(np.swapaxes(a.value, -1, -2), (a,), vjp, name="transpose")


def concat(parts, axis: int = -1) -> Node:
    parts = [as_node(p) for p in parts]
    _check(len(parts) > 0, "concat", "needs at least one part")
    try:
        out_v = np.concatenate([p.value for p in parts], axis=axis)
    except ValueError as exc:
        shapes = [p.value.shape for p in parts]
        raise EvaluationError(f"concat: incompatible part shapes {shapes}") from exc
    ax = axis % out_v.ndim
    widths = [p.value.shape[ax] for p in parts]

    def vjp(g: Node):
        grads, off = [], 0
        for w in widths:
            grads.append(slice_axis(g, off, off + w, ax))
            off += w
        return tuple(grads)

    return Node(out_v, tuple(parts), vjp, name="concat")


def slice_axis(a, start: int, stop: int, axis: int = -1) -> Node:
    a = as_node(a)
    ax = axis % a.value.ndim
    _check(0 <= start <= stop <= a.value.shape[ax], "slice", "range out of bounds", a)
    idx = tuple(
        slice(start, stop) if i == ax else slice(None) for i in range(a.value.ndim)
    )

    def vjp(g: Node):
        return (pad_axis(g, start, a.value.shape[ax], ax),)

    return Node(a.value[idx], (a,), vjp, name="slice")


def pad_axis(a, start: int, total: int, axis: int = -1) -> Node:
    """Embed ``a`` into a zero array whose ``axis`` has length ``total``."""
    a = as_node(a)
    ax = axis % a.value.ndim
    width = a.value.shape[ax]
    _check(0 <= start and start + width <= total, "pad", "range out of bounds", a)
    shape = tuple(total if i == ax else n for i, n in enumerate(a.value.shape))
    out_v = np.zeros(shape)
    idx = tuple(
        slice(start, start + width) if i == ax else slice(None)
        for i in range(a.value.ndim)
    )
    out_v[idx] = a.value

    def vjp(g: Node):
        return (slice_axis(g, start, start + width, ax),)

    return Node(out_v, (a,), vjp, name="pad")


def take(a, indices, axis: int = 0) -> Node:
    """Gather rows along ``axis``; duplicate indices scatter-add on backward."""
    a = as_node(a)
    idx = np.asarray(indices, dtype=np.intp)
    ax = axis % a.value.ndim
    _check(
        idx.size == 0 or (idx.min() >= 0 and idx.max() < a.value.shape[ax]),
        "take", "index out of range", a,
    )

    def vjp(g: Node):
        return (put(g, idx, a.value.shape, ax),)

    return Node(np.take(a.value, idx, axis=ax), (a,), vjp, name="take")


def put(a, indices, shape: tuple[int, ...], axis: int = 0) -> Node:
    """Scatter-add ``a`` into a zero array of ``shape`` along ``axis``."""
    a = as_node(a)
    idx = np.asarray(indices, dtype=np.intp)
    ax = axis % len(shape)
    out_v = np.zeros(shape)
    sel = tuple(idx if i == ax else slice(None) for i in range(len(shape)))
    np.add.at(out_v, sel, a.value)

    def vjp(g: Node):
        return (take(g, idx, ax),)

    return Node(out_v, (a,), vjp, name="put")


# ---------------------------------------------------------------------------
# linear maps


def matmul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check(a.value.ndim >= 2 and b.value.ndim >= 2, "matmul", "operands need ndim >= 2", a, b)
    av, bv = a.value, b.value
    # a stack of inputs against one shared matrix collapses to a single
    # product, which also keeps its backward free of stacked temporaries
    stacked = av.ndim > 2 and bv.ndim == 2 and av.shape[-1] == bv.shape[0]
    try:
        if stacked:
            rows = int(np.prod(av.shape[:-1]))
            out_v = (av.reshape(rows, av.shape[-1]) @ bv).reshape(
                *av.shape[:-1], bv.shape[1]
            )
        else:
            out_v = av @ bv
    except ValueError as exc:
        raise EvaluationError(
            f"matmul: incompatible shapes {a.value.shape} @ {b.value.shape} "
            f"(operands: {a.name}, {b.name})"
        ) from exc

    if stacked:
        rows = int(np.prod(av.shape[:-1]))

        def vjp(g: Node):
            ga = matmul(g, transpose_last(b)) if a.requires else None
            gb = None
            if b.requires:
                flat_a = reshape(a, (rows, av.shape[-1]))
                flat_g = reshape(g, (rows, bv.shape[1]))
                gb = matmul(transpose_last(flat_a), flat_g)
            return ga, gb

    else:

        def vjp(g: Node):
            ga = (
                _unbroadcast(matmul(g, transpose_last(b)), a.value.shape)
                if a.requires
                else None
            )
            gb = (
                _unbroadcast(matmul(transpose_last(a), g), b.value.shape)
                if b.requires
                else None
            )
            return ga, gb

    return Node(out_v, (a, b), vjp, name="matmul")


def affine(x, w, b) -> Node:
    """x @ w + b with ``b`` broadcast over leading axes."""
    x, w, b = as_node(x), as_node(w), as_node(b)
    _check(w.value.ndim == 2, "affine", "weight must be a matrix", w)
    _check(
        b.value.shape == (w.value.shape[1],),
        "affine", f"bias shape {b.value.shape} does not match weight {w.value.shape}", b,
    )
    _check(
        x.value.ndim >= 2 and x.value.shape[-1] == w.value.shape[0],
        "affine", f"input shape {x.value.shape} does not match weight {w.value.shape}", x,
    )
    return add(matmul(x, w), b)


# ---------------------------------------------------------------------------
# backward pass


def _topo(root: Node) -> list[Node]:
    """Iterative post-order over the ``requires`` subgraph."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires and id(p) not in seen:
                stack.append((p, False))
    return order


def backprop(root: Node, wrt) -> dict[Node, Node]:
    """Gradient of the scalar ``root`` with respect to each node in ``wrt``.

    Returns gradients as graph nodes, so they can be differentiated again.
    Nodes unreachable from ``root`` get zero gradients.
    """
    if root.value.size != 1:
        raise EvaluationError(
            f"backprop: root must be scalar, got shape {root.value.shape}"
        )
    wrt = list(wrt)
    grads: dict[int, Node] = {id(root): const(np.ones(root.value.shape), name="seed")}
    if root.requires:
        for node in reversed(_topo(root)):
            g = grads.get(id(node))
            if g is None or node.vjp is None:
                continue
            parent_grads = node.vjp(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires:
                    continue
                if pg.value.shape != parent.value.shape:
                    raise EvaluationError(
                        f"backprop: gradient shape {pg.value.shape} does not match "
                        f"node {parent.name} shape {parent.value.shape}"
                    )
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else add(acc, pg)
    return {
        w: grads.get(id(w), const(np.zeros(w.value.shape), name="zero-grad"))
        for w in wrt
    }


def gradients(root: Node, wrt) -> list[Array]:
    """Convenience: gradient arrays of ``root`` w.r.t. each node in ``wrt``."""
    wrt = list(wrt)
    table = backprop(root, wrt)
    return [table[w].value for w in wrt]


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """First/second moment accumulators with step count for bias correction."""

    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    params: dict[str, Array],
    grads: dict[str, Array],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, Array], AdamState]:
    """One bias-corrected Adam update. Purely functional: inputs untouched.

    Rejects non-finite gradients rather than corrupting the moments.
    """
    if set(params) != set(grads):
        missing = set(params) ^ set(grads)
        raise OptimizerError(f"adam: param/grad key mismatch: {sorted(missing)}")
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"adam: non-finite gradient for '{key}'")
    t = state.step + 1
    new_m, new_v, new_p = {}, {}, {}
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for key, p in params.items():
        g = np.asarray(grads[key], dtype=np.float64)
        if g.shape != p.shape:
            raise OptimizerError(
                f"adam: gradient shape {g.shape} does not match param '{key}' {p.shape}"
            )
        m = state.m.get(key, np.zeros_like(p))
        v = state.v.get(key, np.zeros_like(p))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_m[key] = m
        new_v[key] = v
        new_p[key] = p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return new_p, AdamState(
        step=t, m=new_m, v=new_v, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
