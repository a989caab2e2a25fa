"""Differentiable primitives.

Every op takes Tensors (or array-likes, treated as constants), computes the
forward value with numpy and registers a backward closure via
:func:`make_node`. Binary elementwise ops follow numpy broadcasting; their
gradients are summed back down to the input shapes.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_tensor, get_dtype, make_node, scatter_grad


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return make_node(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return make_node(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return make_node(
        a.data * b.data, (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        ),
        "mul",
    )


def matmul(a, b) -> Tensor:
    """numpy ``@`` for 2-D/N-D x 2-D operands (batched left side)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[0] or b.ndim != 2:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            a2 = a.data.reshape(-1, a.shape[-1])
            gb = a2.T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return make_node(a.data @ b.data, (a, b), backward, "matmul")


def affine(x, W, b) -> Tensor:
    """``x @ W + b`` as one node."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"affine: x{x.shape} W{W.shape} b{b.shape}")

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ W.data.T if x.requires_grad else None
        gW = x.data.reshape(-1, x.shape[-1]).T @ g2 if W.requires_grad else None
        gb = g2.sum(axis=0) if b.requires_grad else None
        return gx, gW, gb

    return make_node(x.data @ W.data + b.data, (x, W, b), backward, "affine")


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_node(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward, "sum")


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def _is_basic(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(p is None or p is Ellipsis or isinstance(p, (slice, int, np.integer)) for p in parts)


def index(x, idx) -> Tensor:
    """Basic or advanced indexing; the backward scatters into the parent's gradient."""
    x = as_tensor(x)
    basic = _is_basic(idx)

    def backward(g):
        scatter_grad(x, idx, g, unique=basic)
        return (None,)

    return make_node(x.data[idx], (x,), backward, "index")


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ax = axis % xs[0].ndim
    for x in xs[1:]:
        if x.ndim != xs[0].ndim or any(
            x.shape[i] != xs[0].shape[i] for i in range(x.ndim) if i != ax
        ):
            raise ShapeMismatch(f"concat: {[t.shape for t in xs]} along {axis}")
    bounds = np.cumsum([0] + [x.shape[ax] for x in xs])

    def backward(g):
        out = []
        for i in range(len(xs)):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(bounds[i], bounds[i + 1])
            out.append(g[tuple(sl)])
        return out

    return make_node(np.concatenate([x.data for x in xs], axis=ax), xs, backward, "concat")


def stack(xs, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    shapes = {x.shape for x in xs}
    if len(shapes) != 1:
        raise ShapeMismatch(f"stack: {[x.shape for x in xs]}")
    ax = axis % (xs[0].ndim + 1)

    def backward(g):
        return [np.take(g, i, axis=ax) for i in range(len(xs))]

    return make_node(np.stack([x.data for x in xs], axis=ax), xs, backward, "stack")


def exp(x) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return make_node(y, (x,), lambda g: (g * y,), "exp")


def log(x) -> Tensor:
    x = as_tensor(x)
    return make_node(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return make_node(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return make_node(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_node(x.data * mask, (x,), lambda g: (g * mask,), "relu")


ACTIVATIONS = {"tanh": tanh, "sigmoid": sigmoid, "relu": relu}


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    y = _softmax(x.data, axis)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_node(y, (x,), backward, "softmax")


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse

    def backward(g):
        return (g - np.exp(y) * g.sum(axis=axis, keepdims=True),)

    return make_node(y, (x,), backward, "log_softmax")


def cross_entropy(logits, target, weights=None, reduction: str = "mean") -> Tensor:
    """Softmax cross-entropy over the last axis.

    ``target`` holds integer class ids with shape ``logits.shape[:-1]``.
    ``weights`` (same shape as target) scales each item, e.g. a 0/1 mask for
    padded decode steps. ``reduction`` is "mean" (over weight mass), "sum" or
    "none".
    """
    logits = as_tensor(logits)
    target = np.asarray(target, dtype=np.int64)
    if target.shape != logits.shape[:-1]:
        raise ShapeMismatch(f"cross_entropy: logits {logits.shape} vs target {target.shape}")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    w = np.ones(target.shape, dtype=logits.data.dtype) if weights is None else np.asarray(
        weights, dtype=logits.data.dtype
    )
    losses = -picked * w
    if reduction == "none":
        value, scale = losses, None
    elif reduction == "sum":
        value, scale = np.asarray(losses.sum()), 1.0
    elif reduction == "mean":
        denom = max(float(w.sum()), 1e-12)
        value, scale = np.asarray(losses.sum() / denom), 1.0 / denom
    else:
        raise ValueError(f"unknown reduction {reduction!r}")

    def backward(g):
        gl = g if scale is None else g * scale
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
        return ((p - onehot) * (w * gl)[..., None],)

    return make_node(value.astype(logits.data.dtype, copy=False), (logits,), backward, "cross_entropy")


def embedding_lookup(table, ids) -> Tensor:
    """Gather rows of ``table`` for integer ``ids`` of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeMismatch(f"embedding_lookup: id out of range for table {table.shape}")

    def backward(g):
        flat = ids.reshape(-1)
        rows = g.reshape(-1, table.shape[1])
        # sum duplicate ids first so the scatter touches each row once
        uniq, inv = np.unique(flat, return_inverse=True)
        order = np.argsort(inv, kind="stable")
        starts = np.searchsorted(inv[order], np.arange(len(uniq)))
        scatter_grad(table, uniq, np.add.reduceat(rows[order], starts, axis=0), unique=True)
        return (None,)

    return make_node(table.data[ids], (table,), backward, "embedding_lookup")


def dropout(x, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-p) while training."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return make_node(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def constant(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=get_dtype()))
