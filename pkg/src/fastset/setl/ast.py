"""SETL syntax tree.

Spans are recorded for diagnostics but excluded from equality, so two
parses of differently formatted but equivalent text compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any, Optional, Tuple

from ..values import Code, FrozenMap, render


def _span():
    return field(default=None, compare=False, repr=False)


class Node:
    __slots__ = ()


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Const(Node):
    value: Any
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class Name(Node):
    id: str
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class Member(Node):
    """``obj.name`` (field read, ``.owner`` or ``.last``)."""

    obj: Node
    name: str
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class Index(Node):
    obj: Node
    key: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class SetLit(Node):
    items: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class ListLit(Node):
    items: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class FuncCall(Node):
    """Builtin function such as ``size(voted)``."""

    name: str
    args: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class ClaimExpr(Node):
    """``claim(...)`` used as a value: the digest of that data claim."""

    args: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class CodeArg(Node):
    """A statement list passed as a block argument."""

    body: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


# ----------------------------------------------------------------- statements


@dataclass(frozen=True)
class GuardStmt(Node):
    expr: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class AssignStmt(Node):
    """``target[index] op expr``.

    ``op`` is one of ``:=`` ``=`` ``+=`` ``-=`` or a collection method
    ``add`` ``remove`` ``sub`` ``next`` ``append`` written ``target.op(expr)``.
    """

    target: str
    index: Optional[Node]
    op: str
    expr: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class VerifyStmt(Node):
    signers: Node
    quorum: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class TransferStmt(Node):
    to: Node
    value: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class ClaimStmt(Node):
    args: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class IsSettledStmt(Node):
    claim: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class ApplyStmt(Node):
    code: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class IfStmt(Node):
    cond: Node
    body: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class SpliceStmt(Node):
    """A bare block-valued parameter such as the ``C`` in ``do(C) { C }``."""

    param: str
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class CallStmt(Node):
    """``target.block(args)``."""

    target: Node
    block: str
    args: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class CreateContractStmt(Node):
    """``contract(NAME[args])`` or ``contract( <inline script> )``."""

    template: Any  # str (template name) or Script
    args: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class CreateInstanceStmt(Node):
    contract: Node
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class EllipsisStmt(Node):
    span: Optional[Tuple[int, int]] = _span()


# --------------------------------------------------------------------- script


@dataclass(frozen=True)
class FieldDecl(Node):
    name: str
    type: str
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class BlockDef(Node):
    name: str
    params: Tuple[str, ...]
    is_instance: bool
    body: Tuple[Node, ...]
    span: Optional[Tuple[int, int]] = _span()


@dataclass(frozen=True)
class Script(Node):
    name: Optional[str] = None
    template_params: Tuple[str, ...] = ()
    contract_fields: Tuple[FieldDecl, ...] = ()
    instance_fields: Tuple[FieldDecl, ...] = ()
    contract_constructor: Optional[Tuple[Node, ...]] = None
    instance_constructor: Optional[Tuple[Node, ...]] = None
    blocks: Tuple[BlockDef, ...] = ()
    elided: bool = False  # the listing contains "..." members

    def block(self, name: str) -> Optional[BlockDef]:
        for b in self.blocks:
            if b.name == name:
                return b
        return None

    def field_names(self, instance: bool) -> Tuple[str, ...]:
        decls = self.instance_fields if instance else self.contract_fields
        return tuple(d.name for d in decls)


def dump(node: Any) -> Any:
    """JSON-compatible structural dump (spans omitted) used for snapshots."""
    if isinstance(node, Node) and is_dataclass(node):
        out = {"node": type(node).__name__}
        for f in fields(node):
            if f.name == "span":
                continue
            out[f.name] = dump(getattr(node, f.name))
        return out
    if isinstance(node, tuple):
        return [dump(x) for x in node]
    if node is None or isinstance(node, (bool, int, str)):
        return node
    if isinstance(node, (bytes, frozenset, FrozenMap, Code)) or type(node).__name__ in ("Address", "_Infinity"):
        return {"value": render(node)}
    return repr(node)
