"""Runtime values shared by claims, expressions and SETL scripts.

Values are immutable and hashable so that states built from them can be
compared and digested:

    int / bool / str / bytes      scalars (ints are arbitrary precision)
    Address                       32-byte account identifier
    frozenset                     SETL ``Set``
    tuple                         SETL ``List``
    FrozenMap                     SETL ``K -> V`` maps
    Code                          quoted SETL statements passed as block arguments
    INFINITY                      the ``infinity`` literal, larger than any int
    None                          the ``none`` literal (e.g. ``last`` of an empty list)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Iterator, Mapping


ADDRESS_LEN = 32


@dataclass(frozen=True, order=True)
class Address:
    raw: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.raw, bytes) or len(self.raw) != ADDRESS_LEN:
            raise ValueError(f"address must be {ADDRESS_LEN} bytes")

    @classmethod
    def from_name(cls, name: str) -> "Address":
        """Deterministic test address for a human-readable alias."""
        return cls(hashlib.sha256(b"fastset/alias/" + name.encode()).digest())

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.raw.hex()

    def short(self) -> str:
        return self.raw.hex()[:8]

    def __repr__(self) -> str:
        return f"Address({self.short()})"


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()


@dataclass(frozen=True)
class Code:
    """SETL statements passed by value, e.g. the ``C`` in ``do(C)``."""

    source: str

    def __repr__(self) -> str:
        return f"Code({self.source!r})"


class FrozenMap(Mapping):
    __slots__ = ("_d", "_hash")

    def __init__(self, items: Any = ()) -> None:
        self._d = dict(items)
        self._hash = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self) -> Iterator:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, FrozenMap):
            return self._d == other._d
        return NotImplemented

    def set(self, key, value) -> "FrozenMap":
        d = dict(self._d)
        d[key] = value
        return FrozenMap(d)

    def __repr__(self) -> str:
        return f"FrozenMap({self._d!r})"


EMPTY_MAP = FrozenMap()


def type_name(value: Any) -> str:
    if isinstance(value, bool):
        return "Bool"
    if isinstance(value, int):
        return "Int"
    if isinstance(value, str):
        return "String"
    if isinstance(value, bytes):
        return "Bytes"
    if isinstance(value, Address):
        return "Address"
    if isinstance(value, frozenset):
        return "Set"
    if isinstance(value, tuple):
        return "List"
    if isinstance(value, FrozenMap):
        return "Map"
    if isinstance(value, Code):
        return "Code"
    if value is INFINITY:
        return "Infinity"
    if value is None:
        return "None"
    return type(value).__name__


def default_for_type(annotation: str):
    """Initial value of a declared field with no constructor assignment."""
    ann = annotation.replace(" ", "")
    if "->" in ann:
        return EMPTY_MAP
    return {
        "Int": 0,
        "Bool": False,
        "String": "",
        "Bytes": b"",
        "Set": frozenset(),
        "List": (),
        "Address": None,
    }.get(ann)


def render(value: Any) -> str:
    """Compact human-readable rendering used in traces and reports."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Address):
        return "@" + value.short()
    if isinstance(value, str):
        return '"' + value.replace('"', '\\"') + '"'
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, frozenset):
        return "{" + ", ".join(sorted(render(v) for v in value)) + "}"
    if isinstance(value, tuple):
        return "[" + ", ".join(render(v) for v in value) + "]"
    if isinstance(value, FrozenMap):
        inner = sorted(f"{render(k)}: {render(v)}" for k, v in value.items())
        return "{" + ", ".join(inner) + "}"
    if isinstance(value, Code):
        return "code{" + value.source + "}"
    if value is INFINITY:
        return "infinity"
    if value is None:
        return "none"
    return repr(value)
