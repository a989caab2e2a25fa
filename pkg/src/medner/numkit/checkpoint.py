"""Parameter checkpoints: a flat binary container plus a JSON manifest.

Binary layout (little endian), repeated per parameter::

    u32 name_len | name (utf-8) | u32 ndim | u32 * ndim extents | f32 * prod(extents)

The manifest sits next to the container as ``<path>.json`` and records the
precision, seed, step count and any caller metadata.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DataError
from .optim import ParamStore


def save_params(path, store: ParamStore, seed: int | None = None, meta: dict[str, Any] | None = None) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        for name, t in store.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
    manifest = {
        "precision": 32,
        "seed": seed,
        "step": store.step,
        "params": {name: list(t.shape) for name, t in store.items()},
        "meta": meta or {},
    }
    Path(f"{path}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_params(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    out: dict[str, np.ndarray] = {}
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise DataError(f"{path}: truncated checkpoint")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    while pos < len(data):
        (n,) = struct.unpack("<I", take(4))
        name = take(n).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape).copy()
    return out


def read_manifest(path) -> dict[str, Any]:
    return json.loads(Path(f"{path}.json").read_text())


def load_params(path, store: ParamStore) -> dict[str, Any]:
    """Fill ``store`` from a checkpoint; returns the manifest."""
    manifest = read_manifest(path)
    values = read_params(path)
    missing = set(store.params) - set(values)
    if missing:
        raise DataError(f"{path}: checkpoint lacks {sorted(missing)}")
    store.load({k: values[k] for k in store.params})
    store.step = int(manifest.get("step", 0))
    return manifest
