"""Trainable parameter storage, initialisation, Adam and gradient utilities."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, get_dtype


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in, fan_out) if shape is None else shape
    return rng.uniform(-limit, limit, size=shape)


class ParamStore:
    """Named trainable tensors plus their Adam moments."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=get_dtype()), requires_grad=True, name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def items(self):
        return self.params.items()

    def num_params(self) -> int:
        return int(sum(t.size for t in self.params.values()))

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Current gradients, zeros for parameters the loss did not touch."""
        return {
            k: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for k, t in self.params.items()
        }

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load(self, values: Mapping[str, np.ndarray]) -> None:
        for k, arr in values.items():
            t = self.params[k]
            if t.shape != np.shape(arr):
                raise ShapeMismatch(f"{k}: stored {np.shape(arr)} vs parameter {t.shape}")
            t.data = np.array(arr, dtype=t.data.dtype)

    def astype(self, dtype) -> None:
        for k, t in self.params.items():
            t.data = t.data.astype(dtype)
            self.m[k] = self.m[k].astype(dtype)
            self.v[k] = self.v[k].astype(dtype)


def adam_step(
    params: ParamStore,
    grads: Mapping[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamStore:
    """One bias-corrected Adam update, applied in place."""
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if np.shape(g) != params[name].shape:
            raise ShapeMismatch(f"{name}: grad {np.shape(g)} vs param {params[name].shape}")
    params.step += 1
    t = params.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, g in grads.items():
        p = params[name]
        m = params.m[name] = beta1 * params.m[name] + (1.0 - beta1) * g
        v = params.v[name] = beta2 * params.v[name] + (1.0 - beta2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.data = (p.data - update).astype(p.data.dtype, copy=False)
    return params


def lr_schedule(lr0: float, decay: float, t: float) -> float:
    """Power scheduling: lr0 / (1 + decay * t); callers count t in optimizer updates."""
    if decay < 0 or t < 0:
        raise ValueError("decay and t must be non-negative")
    return lr0 / (1.0 + decay * t)


def clip_gradients(grads: Mapping[str, np.ndarray], c: float = 5.0) -> dict[str, np.ndarray]:
    """Element-wise clamp of every gradient to [-c, c]."""
    if c <= 0:
        raise ValueError("clip value must be positive")
    return {k: np.clip(g, -c, c) for k, g in grads.items()}
