"""Expression trees carried inside claims and evaluated at apply time.

Reads of fields, balances and owners are kept symbolic so that a claim
compiled on one replica evaluates against whatever state that replica has
when it actually applies the claim.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Tuple

from .encoding import digest, record
from .values import INFINITY, Address, FrozenMap, render, type_name


class EvalError(Exception):
    """Raised for type mismatches, unknown accounts and similar faults.

    A claim whose expression raises is simply invalid; the error never
    escapes the claim semantics.
    """


class Expr:
    __slots__ = ()


@record
@dataclass(frozen=True)
class Lit(Expr):
    value: Any


@record
@dataclass(frozen=True)
class Field(Expr):
    """Value of ``name`` stored on the account ``account`` evaluates to."""

    account: Expr
    name: str


@record
@dataclass(frozen=True)
class Owner(Expr):
    account: Expr


@record
@dataclass(frozen=True)
class Balance(Expr):
    """Native token balance of an account."""

    account: Expr


@record
@dataclass(frozen=True)
class Time(Expr):
    pass


@record
@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@record
@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@record
@dataclass(frozen=True)
class SetOf(Expr):
    items: Tuple[Expr, ...]


@record
@dataclass(frozen=True)
class ListOf(Expr):
    items: Tuple[Expr, ...]


@record
@dataclass(frozen=True)
class Call(Expr):
    """Builtin function application (see ``FUNCTIONS``)."""

    fn: str
    args: Tuple[Expr, ...]


@record
@dataclass(frozen=True)
class DataDigest(Expr):
    """Digest identifying a data claim ``claim(tag, payload...)``.

    The digest covers the tag and payload but not the issuer, so a contract
    can ask whether somebody else settled a given piece of data.
    """

    tag: Expr
    payload: Tuple[Expr, ...]


def data_digest(tag: Any, payload: tuple) -> bytes:
    return digest(("data", tag, tuple(payload)))


def _lt(a, b) -> bool:
    if a is INFINITY:
        if b is INFINITY or isinstance(b, int) and not isinstance(b, bool):
            return False
    elif b is INFINITY:
        if isinstance(a, int) and not isinstance(a, bool):
            return True
    ta, tb = type_name(a), type_name(b)
    if ta != tb or ta not in ("Int", "String", "Bytes", "Address"):
        raise EvalError(f"cannot order {ta} and {tb}")
    return a < b


def values_equal(a, b) -> bool:
    if type_name(a) != type_name(b):
        return False
    return a == b


def _need(value, kind: str):
    if type_name(value) != kind:
        raise EvalError(f"expected {kind}, got {type_name(value)}")
    return value


def _add(a, b):
    ta, tb = type_name(a), type_name(b)
    if ta == tb == "Int":
        return a + b
    if "Infinity" in (ta, tb) and ta in ("Int", "Infinity") and tb in ("Int", "Infinity"):
        return INFINITY
    if ta == tb and ta in ("String", "Bytes", "List"):
        return a + b
    if ta == tb == "Set":
        return a | b
    raise EvalError(f"cannot add {ta} and {tb}")


def _sub(a, b):
    ta, tb = type_name(a), type_name(b)
    if ta == tb == "Int":
        return a - b
    if ta == "Infinity" and tb == "Int":
        return INFINITY
    if ta == tb == "Set":
        return a - b
    raise EvalError(f"cannot subtract {tb} from {ta}")


def _size(x):
    if type_name(x) not in ("Set", "List", "Map", "String", "Bytes"):
        raise EvalError(f"size of {type_name(x)}")
    return len(x)


def _last(x):
    _need(x, "List")
    return x[-1] if x else None


def _index(m, k):
    if type_name(m) == "List":
        _need(k, "Int")
        if not 0 <= k < len(m):
            raise EvalError("list index out of range")
        return m[k]
    _need(m, "Map")
    return m.get(k, 0)


def _map_set(m, k, v):
    _need(m, "Map")
    return m.set(k, v)


def _set_add(s, x):
    return _need(s, "Set") | {x}


def _set_remove(s, x):
    return _need(s, "Set") - {x}


def _list_append(lst, x):
    return _need(lst, "List") + (x,)


FUNCTIONS = {
    "size": _size,
    "last": _last,
    "index": _index,
    "map_set": _map_set,
    "set_add": _set_add,
    "set_remove": _set_remove,
    "list_append": _list_append,
}


def evaluate(expr: Expr, view, ctx) -> Any:
    """Evaluate ``expr`` against a read-only state ``view``.

    ``view`` must provide ``field(addr, name)``, ``owner(addr)`` and
    ``balance(addr)``; ``ctx`` provides ``timestamp``.
    """
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Field):
        return view.field(_need(evaluate(expr.account, view, ctx), "Address"), expr.name)
    if isinstance(expr, Owner):
        return view.owner(_need(evaluate(expr.account, view, ctx), "Address"))
    if isinstance(expr, Balance):
        return view.balance(_need(evaluate(expr.account, view, ctx), "Address"))
    if isinstance(expr, Time):
        return ctx.timestamp
    if isinstance(expr, Not):
        v = evaluate(expr.operand, view, ctx)
        return not _need(v, "Bool")
    if isinstance(expr, BinOp):
        op = expr.op
        if op == "and":
            return _need(evaluate(expr.left, view, ctx), "Bool") and _need(
                evaluate(expr.right, view, ctx), "Bool")
        if op == "or":
            return _need(evaluate(expr.left, view, ctx), "Bool") or _need(
                evaluate(expr.right, view, ctx), "Bool")
        a = evaluate(expr.left, view, ctx)
        b = evaluate(expr.right, view, ctx)
        if op == "==":
            return values_equal(a, b)
        if op == "!=":
            return not values_equal(a, b)
        if op == "<":
            return _lt(a, b)
        if op == ">":
            return _lt(b, a)
        if op == "<=":
            return not _lt(b, a)
        if op == ">=":
            return not _lt(a, b)
        if op == "in":
            if type_name(b) not in ("Set", "List", "Map"):
                raise EvalError(f"membership in {type_name(b)}")
            return any(values_equal(a, x) for x in b)
        if op == "+":
            return _add(a, b)
        if op == "-":
            return _sub(a, b)
        raise EvalError(f"unknown operator {op}")
    if isinstance(expr, SetOf):
        return frozenset(evaluate(e, view, ctx) for e in expr.items)
    if isinstance(expr, ListOf):
        return tuple(evaluate(e, view, ctx) for e in expr.items)
    if isinstance(expr, Call):
        fn = FUNCTIONS.get(expr.fn)
        if fn is None:
            raise EvalError(f"unknown function {expr.fn}")
        args = [evaluate(a, view, ctx) for a in expr.args]
        try:
            return fn(*args)
        except TypeError as exc:
            raise EvalError(str(exc)) from exc
    if isinstance(expr, DataDigest):
        tag = evaluate(expr.tag, view, ctx)
        payload = tuple(evaluate(e, view, ctx) for e in expr.payload)
        return data_digest(tag, payload)
    raise EvalError(f"not an expression: {expr!r}")


def show(expr: Expr) -> str:
    """Debug rendering used in traces."""
    if isinstance(expr, Lit):
        return render(expr.value)
    if isinstance(expr, Field):
        return f"{show(expr.account)}.{expr.name}"
    if isinstance(expr, Owner):
        return f"{show(expr.account)}.owner"
    if isinstance(expr, Balance):
        return f"balance({show(expr.account)})"
    if isinstance(expr, Time):
        return "time"
    if isinstance(expr, Not):
        return f"not({show(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({show(expr.left)} {expr.op} {show(expr.right)})"
    if isinstance(expr, SetOf):
        return "{" + ", ".join(show(e) for e in expr.items) + "}"
    if isinstance(expr, ListOf):
        return "[" + ", ".join(show(e) for e in expr.items) + "]"
    if isinstance(expr, Call):
        return f"{expr.fn}(" + ", ".join(show(a) for a in expr.args) + ")"
    if isinstance(expr, DataDigest):
        return "claim(" + ", ".join(show(a) for a in (expr.tag,) + expr.payload) + ")"
    return repr(expr)


def lit(value) -> Lit:
    return value if isinstance(value, Expr) else Lit(value)


__all__ = [
    "Expr", "Lit", "Field", "Owner", "Balance", "Time", "Not", "BinOp", "SetOf",
    "ListOf", "Call", "DataDigest", "EvalError", "evaluate", "show", "lit",
    "data_digest", "values_equal", "FUNCTIONS", "Address", "FrozenMap",
]
