"""Canonical binary serialization and digests.

Every value that takes part in the protocol (claims, messages, states) is
serialized with the byte layout below before hashing or signing, so two
replicas that hold equal values always compute equal digests.

Layout (all lengths are unsigned 32-bit big-endian)::

    0x00                      none
    0x01 / 0x02               false / true
    0x03 sign:u8 len mag      integer, sign 0 (>= 0) or 1 (< 0), big-endian magnitude
    0x04 len utf8             string
    0x05 len raw              bytes
    0x06 raw[32]              address
    0x07 count item*          set, items sorted by their own encoding
    0x08 count item*          list (tuple)
    0x09 count (key value)*   map, pairs sorted by the encoding of the key
    0x0A len utf8             quoted code
    0x0B                      infinity
    0x10 name count field*    record (a registered dataclass), fields in
                              declaration order

Decoding is the exact inverse, so ``encode(decode(b)) == b`` for any
``b`` produced by ``encode``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
from typing import Any, Callable, Dict, Tuple, Type

from .values import ADDRESS_LEN, INFINITY, Address, Code, FrozenMap

Digest = bytes

_RECORDS: Dict[str, Type] = {}


class DecodeError(ValueError):
    pass


def record(cls):
    """Class decorator registering a frozen dataclass for canonical encoding."""
    if not dataclasses.is_dataclass(cls):
        raise TypeError("record() expects a dataclass")
    name = cls.__name__
    if name in _RECORDS and _RECORDS[name] is not cls:
        raise TypeError(f"duplicate record name {name}")
    _RECORDS[name] = cls
    cls.__fastset_fields__ = tuple(f.name for f in dataclasses.fields(cls) if f.compare)
    return cls


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def _enc(value: Any, out: list) -> None:
    if value is None:
        out.append(b"\x00")
    elif value is True:
        out.append(b"\x02")
    elif value is False:
        out.append(b"\x01")
    elif isinstance(value, int):
        mag = abs(value)
        raw = mag.to_bytes((mag.bit_length() + 7) // 8, "big") if mag else b""
        out.append(b"\x03" + (b"\x01" if value < 0 else b"\x00") + _u32(len(raw)) + raw)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(b"\x04" + _u32(len(raw)) + raw)
    elif isinstance(value, bytes):
        out.append(b"\x05" + _u32(len(value)) + value)
    elif isinstance(value, Address):
        out.append(b"\x06" + value.raw)
    elif isinstance(value, frozenset):
        items = sorted(encode(v) for v in value)
        out.append(b"\x07" + _u32(len(items)))
        out.extend(items)
    elif isinstance(value, tuple):
        out.append(b"\x08" + _u32(len(value)))
        for v in value:
            _enc(v, out)
    elif isinstance(value, FrozenMap):
        pairs = sorted((encode(k), encode(v)) for k, v in value.items())
        out.append(b"\x09" + _u32(len(pairs)))
        for k, v in pairs:
            out.append(k)
            out.append(v)
    elif isinstance(value, Code):
        raw = value.source.encode("utf-8")
        out.append(b"\x0a" + _u32(len(raw)) + raw)
    elif value is INFINITY:
        out.append(b"\x0b")
    elif hasattr(type(value), "__fastset_fields__"):
        name = type(value).__name__.encode()
        fields = type(value).__fastset_fields__
        out.append(b"\x10" + _u32(len(name)) + name + _u32(len(fields)))
        for f in fields:
            _enc(getattr(value, f), out)
    else:
        raise TypeError(f"cannot encode {type(value).__name__}")


def encode(value: Any) -> bytes:
    out: list = []
    _enc(value, out)
    return b"".join(out)


def digest(value: Any) -> Digest:
    """SHA-256 over the canonical encoding, domain-separated."""
    return hashlib.sha256(b"fastset/v1\x00" + encode(value)).digest()


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated input")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]


def _dec(r: _Reader) -> Any:
    tag = r.take(1)[0]
    if tag == 0x00:
        return None
    if tag == 0x01:
        return False
    if tag == 0x02:
        return True
    if tag == 0x03:
        sign = r.take(1)[0]
        mag = int.from_bytes(r.take(r.u32()), "big")
        return -mag if sign else mag
    if tag == 0x04:
        return r.take(r.u32()).decode("utf-8")
    if tag == 0x05:
        return r.take(r.u32())
    if tag == 0x06:
        return Address(r.take(ADDRESS_LEN))
    if tag == 0x07:
        return frozenset(_dec(r) for _ in range(r.u32()))
    if tag == 0x08:
        return tuple(_dec(r) for _ in range(r.u32()))
    if tag == 0x09:
        n = r.u32()
        items = []
        for _ in range(n):
            k = _dec(r)
            items.append((k, _dec(r)))
        return FrozenMap(items)
    if tag == 0x0A:
        return Code(r.take(r.u32()).decode("utf-8"))
    if tag == 0x0B:
        return INFINITY
    if tag == 0x10:
        name = r.take(r.u32()).decode()
        cls = _RECORDS.get(name)
        if cls is None:
            raise DecodeError(f"unknown record {name}")
        n = r.u32()
        values = [_dec(r) for _ in range(n)]
        if n != len(cls.__fastset_fields__):
            raise DecodeError(f"record {name} arity mismatch")
        return cls(**dict(zip(cls.__fastset_fields__, values)))
    raise DecodeError(f"unknown tag 0x{tag:02x}")


def decode(data: bytes) -> Any:
    r = _Reader(data)
    value = _dec(r)
    if r.pos != len(data):
        raise DecodeError("trailing bytes")
    return value
