"""Binary checkpoint container.

Layout (little-endian): ``b"MBPU"``, u32 version, u32 tensor count, then per
tensor a u32-length-prefixed UTF-8 name, u32 rank, u64 dims and float64
row-major payload.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .network import NetworkParams

MAGIC = b"MBPU"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(params) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, arr in params.items():
        a = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack("<I", a.ndim))
        out.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        out.append(a.tobytes())
    return b"".join(out)


def loads(data: bytes) -> NetworkParams:
    if data[:4] != MAGIC:
        raise CheckpointError("not an MBPU checkpoint (bad magic)")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError("truncated checkpoint")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    arrays = {}
    for _ in range(count):
        (ln,) = struct.unpack("<I", take(4))
        name = take(ln).decode("utf-8")
        if name in arrays:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        size = int(np.prod(shape)) if rank else 1
        arrays[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    return NetworkParams(arrays)


def save_checkpoint(path, params) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(dumps(params))


def load_checkpoint(path) -> NetworkParams:
    with open(os.fspath(path), "rb") as fh:
        return loads(fh.read())
