"""Named-tensor checkpoint container.

Binary layout (all integers little-endian, version 1):

    magic   4 bytes   b"NTC1"
    u32     format version (1)
    u32     tensor count
    then per tensor, sorted by name:
    u16     name length in bytes, followed by the UTF-8 name
    u8      ndim
    u32*    one dim per axis
    f64*    row-major values, little-endian

Writes go through a temp file and rename so a crashed run never leaves a
truncated checkpoint behind.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .engine import Tensor

__all__ = ["save_tensors", "load_tensors", "CheckpointError"]

_MAGIC = b"NTC1"
_VERSION = 1


class CheckpointError(Exception):
    pass


def save_tensors(path, named):
    """Write a name -> Tensor/ndarray mapping to ``path``."""
    items = []
    for name in sorted(named):
        arr = named[name]
        values = arr.values if isinstance(arr, Tensor) else np.asarray(arr)
        # np.ascontiguousarray would promote 0-d arrays to 1-d; np.array keeps rank.
        items.append((name, np.array(values, dtype=np.float64, order="C")))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(items)))
        for name, values in items:
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", values.ndim))
            for dim in values.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(values.astype("<f8").tobytes())
    os.replace(tmp, path)


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_tensors(path):
    """Read a checkpoint back as a name -> float64 ndarray dict."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _MAGIC:
            raise CheckpointError(f"{path} is not a tensor checkpoint")
        version, count = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != _VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "ndim"))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, "dim"))[0] for _ in range(ndim)
            )
            n_values = int(np.prod(shape)) if shape else 1
            raw = _read_exact(fh, 8 * n_values, f"values of {name}")
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("trailing bytes after final tensor")
    return out
