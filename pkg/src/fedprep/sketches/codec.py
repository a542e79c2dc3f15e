"""Little-endian binary framing shared by all summary types.

Layout: 4-byte magic ``FPSK``, 1-byte type tag, 1-byte version, then the
type's payload.  Counts are u64, reals IEEE-754 binary64, strings a u64 byte
length followed by UTF-8.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import MergeError, ParseError

MAGIC = b"FPSK"
VERSION = 1

TAG_MOMENTS = 1
TAG_KLL = 2
TAG_FREQUENT = 3
TAG_CATEGORIES = 4


class Writer:
    def __init__(self, tag: int) -> None:
        self.buf = bytearray(MAGIC)
        self.buf += struct.pack("<BB", tag, VERSION)

    def u64(self, x: int) -> "Writer":
        self.buf += struct.pack("<Q", x)
        return self

    def f64(self, x: float) -> "Writer":
        self.buf += struct.pack("<d", x)
        return self

    def f64s(self, xs: np.ndarray) -> "Writer":
        self.buf += np.asarray(xs, dtype="<f8").tobytes()
        return self

    def string(self, s: str) -> "Writer":
        raw = s.encode("utf-8")
        self.u64(len(raw))
        self.buf += raw
        return self

    def bytes(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes, tag: int) -> None:
        if data[:4] != MAGIC or len(data) < 6:
            raise ParseError("not a fedprep summary (bad magic)")
        got_tag, version = struct.unpack_from("<BB", data, 4)
        if got_tag != tag:
            raise ParseError(f"summary type tag {got_tag}, expected {tag}")
        if version != VERSION:
            raise ParseError(f"unsupported summary version {version}")
        self.data = data
        self.pos = 6

    def _need(self, n: int) -> None:
        if self.pos + n > len(self.data):
            raise ParseError(f"summary truncated at byte {self.pos}")

    def u64(self) -> int:
        self._need(8)
        (x,) = struct.unpack_from("<Q", self.data, self.pos)
        self.pos += 8
        return x

    def f64(self) -> float:
        self._need(8)
        (x,) = struct.unpack_from("<d", self.data, self.pos)
        self.pos += 8
        return x

    def f64s(self, n: int) -> np.ndarray:
        self._need(8 * n)
        out = np.frombuffer(self.data, dtype="<f8", count=n, offset=self.pos).astype(np.float64)
        self.pos += 8 * n
        return out

    def string(self) -> str:
        n = self.u64()
        self._need(n)
        s = self.data[self.pos : self.pos + n].decode("utf-8")
        self.pos += n
        return s

    def done(self) -> None:
        if self.pos != len(self.data):
            raise ParseError(f"{len(self.data) - self.pos} trailing bytes after summary")


def peek_tag(data: bytes) -> int:
    if data[:4] != MAGIC or len(data) < 6:
        raise ParseError("not a fedprep summary (bad magic)")
    return data[4]


def check_same_type(a: object, b: object) -> None:
    if type(a) is not type(b):
        raise MergeError(f"cannot merge {type(a).__name__} with {type(b).__name__}")
