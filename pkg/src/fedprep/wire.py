"""Compact tagged binary encoding for protocol messages.

Every message crossing the simulated transport is encoded here; the encoded
length is what the communication meter charges.  Supported values: ``None``,
bool, int, float, str, bytes, lists/tuples, str-keyed dicts, numpy arrays
(float64, int64, bool) and the summary types from :mod:`fedprep.sketches`.
"""

from __future__ import annotations

import struct
from typing import Any

import numpy as np

from . import sketches
from .errors import ProtocolError

_NONE, _TRUE, _FALSE, _INT, _FLOAT, _STR, _BYTES, _LIST, _DICT, _ARRAY, _SUMMARY = range(11)
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8"), 2: np.dtype("bool")}
_DTYPE_CODES = {np.dtype("float64"): 0, np.dtype("int64"): 1, np.dtype("bool"): 2}


def _varint(n: int, out: bytearray) -> None:
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    shift = n = 0
    while True:
        byte = data[pos]
        pos += 1
        n |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return n, pos
        shift += 7


def encode(obj: Any) -> bytes:
    out = bytearray()
    _encode(obj, out)
    return bytes(out)


def _encode(obj: Any, out: bytearray) -> None:
    if obj is None:
        out.append(_NONE)
    elif obj is True or obj is False or isinstance(obj, np.bool_):
        out.append(_TRUE if obj else _FALSE)
    elif isinstance(obj, (int, np.integer)):
        out.append(_INT)
        out += struct.pack("<q", int(obj))
    elif isinstance(obj, (float, np.floating)):
        out.append(_FLOAT)
        out += struct.pack("<d", float(obj))
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        out.append(_STR)
        _varint(len(raw), out)
        out += raw
    elif isinstance(obj, (bytes, bytearray)):
        out.append(_BYTES)
        _varint(len(obj), out)
        out += obj
    elif isinstance(obj, np.ndarray):
        arr = obj
        if arr.dtype.kind == "f":
            arr = arr.astype(np.float64)
        elif arr.dtype.kind in "iu":
            arr = arr.astype(np.int64)
        if arr.dtype not in _DTYPE_CODES:
            raise TypeError(f"cannot encode array of dtype {arr.dtype}")
        out.append(_ARRAY)
        out.append(_DTYPE_CODES[arr.dtype])
        _varint(arr.ndim, out)
        for d in arr.shape:
            _varint(d, out)
        out += np.ascontiguousarray(arr, dtype=_DTYPES[_DTYPE_CODES[arr.dtype]]).tobytes()
    elif isinstance(obj, (list, tuple)):
        out.append(_LIST)
        _varint(len(obj), out)
        for item in obj:
            _encode(item, out)
    elif isinstance(obj, dict):
        out.append(_DICT)
        _varint(len(obj), out)
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError("dict keys must be strings")
            _encode(key, out)
            _encode(value, out)
    elif isinstance(obj, tuple(sketches.SUMMARY_TYPES.values())):
        raw = obj.to_bytes()
        out.append(_SUMMARY)
        _varint(len(raw), out)
        out += raw
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def decode(data: bytes) -> Any:
    obj, pos = _decode(data, 0)
    if pos != len(data):
        raise ProtocolError(f"{len(data) - pos} trailing bytes")
    return obj


def _decode(data: bytes, pos: int) -> tuple[Any, int]:
    tag = data[pos]
    pos += 1
    if tag == _NONE:
        return None, pos
    if tag == _TRUE:
        return True, pos
    if tag == _FALSE:
        return False, pos
    if tag == _INT:
        return struct.unpack_from("<q", data, pos)[0], pos + 8
    if tag == _FLOAT:
        return struct.unpack_from("<d", data, pos)[0], pos + 8
    if tag in (_STR, _BYTES, _SUMMARY):
        n, pos = _read_varint(data, pos)
        raw = bytes(data[pos : pos + n])
        pos += n
        if tag == _STR:
            return raw.decode("utf-8"), pos
        if tag == _BYTES:
            return raw, pos
        return sketches.from_bytes(raw), pos
    if tag == _ARRAY:
        dtype = _DTYPES[data[pos]]
        ndim, pos = _read_varint(data, pos + 1)
        shape = []
        for _ in range(ndim):
            d, pos = _read_varint(data, pos)
            shape.append(d)
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(shape).copy()
        return arr, pos + count * dtype.itemsize
    if tag == _LIST:
        n, pos = _read_varint(data, pos)
        items = []
        for _ in range(n):
            item, pos = _decode(data, pos)
            items.append(item)
        return items, pos
    if tag == _DICT:
        n, pos = _read_varint(data, pos)
        out = {}
        for _ in range(n):
            key, pos = _decode(data, pos)
            out[key], pos = _decode(data, pos)
        return out, pos
    raise ProtocolError(f"unknown wire tag {tag}")
