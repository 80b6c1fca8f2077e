"""Little-endian binary readers/writers for the corpus and checkpoint files."""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError


class Writer:
    def __init__(self):
        self.buf = bytearray()

    def raw(self, b: bytes) -> None:
        self.buf += b

    def u8(self, x: int) -> None:
        self.buf += struct.pack("<B", x)

    def u16(self, x: int) -> None:
        self.buf += struct.pack("<H", x)

    def u32(self, x: int) -> None:
        self.buf += struct.pack("<I", x)

    def u64(self, x: int) -> None:
        self.buf += struct.pack("<Q", x)

    def f32s(self, arr: np.ndarray) -> None:
        self.buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()

    def str16(self, s: str) -> None:
        b = s.encode("utf-8")
        self.u16(len(b))
        self.raw(b)

    def block32(self, b: bytes) -> None:
        self.u32(len(b))
        self.raw(b)

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.what}: truncated, wanted {n} more bytes",
                              offset=self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def expect_magic(self, magic: bytes) -> None:
        got = self._take(len(magic))
        if got != magic:
            raise FormatError(f"{self.what}: bad magic {got!r}, expected {magic!r}",
                              offset=0)

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def f32s(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(4 * count), dtype="<f4").copy()

    def str16(self) -> str:
        n = self.u16()
        try:
            return self._take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{self.what}: invalid UTF-8 string", offset=self.pos) from e

    def block32(self) -> bytes:
        return self._take(self.u32())

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{self.what}: {len(self.data) - self.pos} trailing bytes",
                              offset=self.pos)
