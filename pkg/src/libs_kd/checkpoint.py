"""Checkpoint file format: named f32 tensors plus a key=value snapshot.

Layout (little-endian): magic "LIBSCKPT", format version u32, tensor count
u32, then per tensor: name (u16 length + UTF-8), rank u8, dims u32 each,
f32 values; finally a u32-length-prefixed UTF-8 key=value block.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .binio import Reader, Writer
from .errors import FormatError
from .synthdata import kv_from_text, kv_to_text

MAGIC = b"LIBSCKPT"
VERSION = 1


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray],
                    kv: dict[str, str]) -> None:
    w = Writer()
    w.raw(MAGIC)
    w.u32(VERSION)
    w.u32(len(tensors))
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        w.str16(name)
        w.u8(arr.ndim)
        for dim in arr.shape:
            w.u32(dim)
        w.f32s(arr)
    w.block32(kv_to_text(kv).encode("utf-8"))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(w.getvalue())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read tensors (as float32) and the config snapshot."""
    path = Path(path)
    r = Reader(path.read_bytes(), what=str(path))
    r.expect_magic(MAGIC)
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}", offset=8)
    count = r.u32()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.str16()
        rank = r.u8()
        dims = tuple(r.u32() for _ in range(rank))
        n = 1
        for dim in dims:
            n *= dim
        tensors[name] = r.f32s(n).reshape(dims)
    kv = kv_from_text(r.block32().decode("utf-8"))
    r.done()
    return tensors, kv


def file_hash(path: str | Path) -> str:
    """Short content hash used to key teacher artifact caches."""
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
