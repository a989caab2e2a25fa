"""LSTM and GRU cells built on the tape ops.

Sequences are batch-major ``(B, T, D)``. Variable lengths are handled with a
``(B, T)`` 0/1 mask: at masked steps a cell carries its previous state
forward, so the final state of a sequence is the state after its last real
token, in either direction.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import ops
from .optim import ParamStore, glorot_uniform
from .tensor import Tensor, as_tensor, make_node


def _lstm_gates(z: Tensor, c: Tensor) -> Tensor:
    """Fused LSTM update. Returns ``[h', c']`` concatenated on the last axis.

    Gate order in ``z`` is input, forget, cell candidate, output.
    """
    H = c.shape[-1]
    zd = z.data
    i = ops._sigmoid(zd[:, :H])
    f = ops._sigmoid(zd[:, H:2 * H])
    g = np.tanh(zd[:, 2 * H:3 * H])
    o = ops._sigmoid(zd[:, 3 * H:])
    c_new = f * c.data + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    def backward(grad):
        gh, gc = grad[:, :H], grad[:, H:]
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c.data * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                gh * tc * o * (1.0 - o),
            ],
            axis=1,
        )
        return dz, dc * f

    return make_node(np.concatenate([h_new, c_new], axis=1), (z, c), backward, "lstm_gates")


def _keep(new: Tensor, old: Tensor, m: np.ndarray | None) -> Tensor:
    if m is None:
        return new
    return ops.add(ops.mul(new, m), ops.mul(old, 1.0 - m))


class LSTMCell:
    """Standard LSTM: Wx (in, 4H), Wh (H, 4H), b (4H)."""

    def __init__(self, store: ParamStore, prefix: str, input_dim: int, hidden_dim: int,
                 rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        H = hidden_dim
        self.Wx = store.add(f"{prefix}.Wx", glorot_uniform(rng, input_dim, 4 * H))
        self.Wh = store.add(f"{prefix}.Wh", glorot_uniform(rng, H, 4 * H))
        self.b = store.add(f"{prefix}.b", np.zeros(4 * H))

    def project_inputs(self, xs) -> Tensor:
        """Input contribution for every time step at once: ``(B, T, 4H)``."""
        xs = as_tensor(xs)
        if xs.shape[-1] != self.input_dim:
            raise ShapeMismatch(f"LSTM input dim {xs.shape[-1]} != {self.input_dim}")
        return ops.affine(xs, self.Wx, self.b)

    def step(self, x, h, c, x_proj: Tensor | None = None) -> tuple[Tensor, Tensor]:
        if x_proj is None:
            x = as_tensor(x)
            if x.shape[-1] != self.input_dim:
                raise ShapeMismatch(f"LSTM input dim {x.shape[-1]} != {self.input_dim}")
            x_proj = ops.affine(x, self.Wx, self.b)
        h, c = as_tensor(h), as_tensor(c)
        if h.shape[-1] != self.hidden_dim or c.shape != h.shape:
            raise ShapeMismatch(f"LSTM state {h.shape}/{c.shape}, hidden {self.hidden_dim}")
        hc = _lstm_gates(ops.add(x_proj, ops.matmul(h, self.Wh)), c)
        H = self.hidden_dim
        return hc[:, :H], hc[:, H:]

    def run(self, xs, h0, c0, mask: np.ndarray | None = None, reverse: bool = False):
        """Unroll over ``xs`` (B, T, in). Returns (per-step h list, (h_T, c_T)).

        The per-step list is in time order even when ``reverse`` is set.
        """
        proj = self.project_inputs(xs)
        T = proj.shape[1]
        h, c = as_tensor(h0), as_tensor(c0)
        outs: list[Tensor | None] = [None] * T
        order = range(T - 1, -1, -1) if reverse else range(T)
        for t in order:
            h_new, c_new = self.step(None, h, c, x_proj=proj[:, t])
            m = _step_mask(mask, t, h_new.data.dtype)
            h, c = _keep(h_new, h, m), _keep(c_new, c, m)
            outs[t] = h
        return outs, (h, c)


class GRUCell:
    """GRU with update gate z, reset gate r and candidate n.

    h' = (1 - z) * n + z * h, so a saturated update gate carries the state.
    """

    def __init__(self, store: ParamStore, prefix: str, input_dim: int, hidden_dim: int,
                 rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        H = hidden_dim
        self.Wx = store.add(f"{prefix}.Wx", glorot_uniform(rng, input_dim, 3 * H))
        self.Wzr = store.add(f"{prefix}.Wzr", glorot_uniform(rng, H, 2 * H))
        self.Wn = store.add(f"{prefix}.Wn", glorot_uniform(rng, H, H))
        self.b = store.add(f"{prefix}.b", np.zeros(3 * H))

    def project_inputs(self, xs) -> Tensor:
        xs = as_tensor(xs)
        if xs.shape[-1] != self.input_dim:
            raise ShapeMismatch(f"GRU input dim {xs.shape[-1]} != {self.input_dim}")
        return ops.affine(xs, self.Wx, self.b)

    def step(self, x, h, x_proj: Tensor | None = None) -> Tensor:
        if x_proj is None:
            x = as_tensor(x)
            if x.shape[-1] != self.input_dim:
                raise ShapeMismatch(f"GRU input dim {x.shape[-1]} != {self.input_dim}")
            x_proj = ops.affine(x, self.Wx, self.b)
        h = as_tensor(h)
        if h.shape[-1] != self.hidden_dim:
            raise ShapeMismatch(f"GRU state {h.shape}, hidden {self.hidden_dim}")
        H = self.hidden_dim
        zr = ops.sigmoid(ops.add(x_proj[:, :2 * H], ops.matmul(h, self.Wzr)))
        z, r = zr[:, :H], zr[:, H:]
        n = ops.tanh(ops.add(x_proj[:, 2 * H:], ops.matmul(ops.mul(r, h), self.Wn)))
        return ops.add(n, ops.mul(z, ops.sub(h, n)))

    def run(self, xs, h0, mask: np.ndarray | None = None, reverse: bool = False):
        proj = self.project_inputs(xs)
        T = proj.shape[1]
        h = as_tensor(h0)
        outs: list[Tensor | None] = [None] * T
        order = range(T - 1, -1, -1) if reverse else range(T)
        for t in order:
            h_new = self.step(None, h, x_proj=proj[:, t])
            h = _keep(h_new, h, _step_mask(mask, t, h_new.data.dtype))
            outs[t] = h
        return outs, h


def _step_mask(mask: np.ndarray | None, t: int, dtype) -> np.ndarray | None:
    if mask is None:
        return None
    col = mask[:, t]
    if col.all():
        return None
    return col.astype(dtype)[:, None]


def lstm_cell_step(cell: LSTMCell, x, state):
    """Functional form: ``(h, c) -> (h', c')`` for one input."""
    h, c = state
    return cell.step(x, h, c)


def gru_cell_step(cell: GRUCell, x, state):
    return cell.step(x, state)
