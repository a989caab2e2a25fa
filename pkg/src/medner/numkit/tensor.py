"""Dense tensors with a recorded tape for reverse-mode differentiation.

Ops executed while a :class:`Tape` is active append their output node to it.
Because a node is appended only after all of its inputs exist, the recording
order is already a topological order, so ``Tape.backward`` simply walks the
list in reverse and visits every node exactly once.

Outside of a tape nothing is recorded, which is how inference runs.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import NonFiniteValue

_DTYPES = {32: np.float32, 64: np.float64}


class _State:
    dtype: type = np.float32
    check_finite: bool = True
    tapes: list["Tape"] = []


_state = _State()


def get_dtype():
    return _state.dtype


def set_precision(bits: int) -> None:
    if bits not in _DTYPES:
        raise ValueError(f"precision must be 32 or 64, got {bits}")
    _state.dtype = _DTYPES[bits]


@contextlib.contextmanager
def precision(bits: int) -> Iterator[None]:
    """Temporarily switch the default float precision (32 or 64 bits)."""
    old = _state.dtype
    set_precision(bits)
    try:
        yield
    finally:
        _state.dtype = old


@contextlib.contextmanager
def finite_checks(enabled: bool) -> Iterator[None]:
    old = _state.check_finite
    _state.check_finite = enabled
    try:
        yield
    finally:
        _state.check_finite = old


def current_tape() -> "Tape | None":
    return _state.tapes[-1] if _state.tapes else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_owned")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype or _state.dtype)
        self.data = arr
        self.grad: np.ndarray | None = None
        self._owned = False
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        tape = current_tape()
        if tape is None:
            raise RuntimeError("backward() needs an active Tape")
        tape.backward(self)

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx):
        from . import ops
        return ops.index(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    # the first gradient is stored by reference; once a second one arrives the
    # tensor owns a private buffer and later sums happen in place
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad, t._owned = g, False
    elif t._owned:
        t.grad += g
    else:
        t.grad, t._owned = t.grad + g, True


def scatter_grad(t: Tensor, idx, g: np.ndarray, unique: bool) -> None:
    """``t.grad[idx] += g`` without materialising a dense gradient per call.

    ``unique`` promises that ``idx`` addresses each element at most once
    (basic slicing), which allows a plain in-place add.
    """
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad, t._owned = np.zeros_like(t.data), True
    elif not t._owned:
        t.grad, t._owned = t.grad.copy(), True
    if unique:
        t.grad[idx] += g
    else:
        np.add.at(t.grad, idx, g)


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]],
    op: str = "",
) -> Tensor:
    """Wrap an op result and register it on the active tape.

    ``backward`` maps the output gradient to one gradient per parent (or None
    for parents that need none).
    """
    if _state.check_finite and not np.isfinite(data).all():
        raise NonFiniteValue(f"non-finite value produced by {op or 'op'}")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._owned = False
    out.name = None
    out._parents = ()
    out._backward = None
    tape = current_tape()
    out.requires_grad = tape is not None and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)

        def run(g: np.ndarray) -> None:
            grads = backward(g)
            for p, pg in zip(out._parents, grads):
                if pg is not None and p.requires_grad:
                    _accumulate(p, pg)

        out._backward = run
        tape.nodes.append(out)
    return out


class Tape:
    """Record of one forward pass.

    Use as a context manager around the forward computation, then call
    :meth:`backward` on the scalar loss. Leaf tensors with
    ``requires_grad=True`` accumulate into ``.grad``.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _state.tapes.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.tapes.remove(self)

    def backward(self, loss: Tensor, grad: np.ndarray | None = None) -> None:
        if not loss.requires_grad:
            return
        if grad is None:
            if loss.size != 1:
                raise ValueError("backward() on a non-scalar needs an explicit grad")
            grad = np.ones_like(loss.data)
        loss.grad = grad
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)
        # free intermediate buffers; leaves keep their gradients
        for node in self.nodes:
            node.grad = None
            node._backward = None
            node._parents = ()
        self.nodes.clear()
