"""Central finite-difference oracle for tape gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import NonFiniteValue
from .optim import ParamStore
from .tensor import Tape, Tensor

# below this magnitude both gradients count as zero and are compared absolutely
REL_FLOOR = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def analytic_grads(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    for t in params.values():
        t.grad = None
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    return {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for k, t in params.items()}


def finite_diff_check(
    loss_fn: Callable[[], Tensor],
    params: ParamStore | Mapping[str, Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
    per_param: bool = False,
):
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` must be deterministic (dropout off) and read the parameters
    each call. Parameters must be 64-bit. ``max_coords`` limits the number of
    probed entries per tensor (sampled without replacement); None probes all.
    With ``per_param`` the per-tensor maxima are returned as well.
    """
    tensors = dict(params.items()) if isinstance(params, ParamStore) else dict(params)
    for name, t in tensors.items():
        if t.data.dtype != np.float64:
            raise ValueError(f"finite-difference checks need float64; {name} is {t.data.dtype}")
    grads = analytic_grads(loss_fn, tensors)
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(len(coords))
        for j, k in enumerate(coords):
            orig = flat[k]
            flat[k] = orig + h
            up = float(loss_fn().data)
            flat[k] = orig - h
            down = float(loss_fn().data)
            flat[k] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteValue(f"loss not finite while probing {name}[{k}]")
            numeric[j] = (up - down) / (2.0 * h)
        analytic = grads[name].reshape(-1)[coords]
        errors[name] = float(relative_error(analytic, numeric).max()) if len(coords) else 0.0
    worst = max(errors.values(), default=0.0)
    return (worst, errors) if per_param else worst
