"""Canonical SETL pretty-printer.

``parse(print_script(parse(src)))`` equals ``parse(src)`` structurally.
Binary operators are always parenthesized, so the output does not depend
on precedence rules.  The printed form is also the canonical text of
quoted code values, which is what ends up inside claims.
"""

from __future__ import annotations

from typing import Iterable, List

from ..encoding import encode
from ..values import INFINITY, Address, Code, FrozenMap
from . import ast as A

INDENT = "    "


def print_value(value) -> str:
    if value is True:
        return "true"
    if value is False:
        return "false"
    if value is None:
        return "none"
    if value is INFINITY:
        return "infinity"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, Address):
        return "@" + value.hex()
    if isinstance(value, frozenset):
        items = sorted(value, key=encode)
        return "{" + ", ".join(print_value(v) for v in items) + "}"
    if isinstance(value, tuple):
        return "[" + ", ".join(print_value(v) for v in value) + "]"
    if isinstance(value, (FrozenMap, Code)):
        raise ValueError(f"{type(value).__name__} values have no literal syntax")
    raise ValueError(f"cannot print {value!r}")


def print_expr(node: A.Node) -> str:
    if isinstance(node, A.Const):
        return print_value(node.value)
    if isinstance(node, A.Name):
        return node.id
    if isinstance(node, A.Member):
        return f"{print_expr(node.obj)}.{node.name}"
    if isinstance(node, A.Index):
        return f"{print_expr(node.obj)}[{print_expr(node.key)}]"
    if isinstance(node, A.Unary):
        # fully parenthesized: ``not`` binds looser than comparisons, so a
        # bare ``not(x) == y`` would reparse as ``not((x) == y)``
        return f"(not {print_expr(node.operand)})"
    if isinstance(node, A.Binary):
        return f"({print_expr(node.left)} {node.op} {print_expr(node.right)})"
    if isinstance(node, A.SetLit):
        return "{" + ", ".join(print_expr(i) for i in node.items) + "}"
    if isinstance(node, A.ListLit):
        return "[" + ", ".join(print_expr(i) for i in node.items) + "]"
    if isinstance(node, A.FuncCall):
        return f"{node.name}(" + ", ".join(print_expr(a) for a in node.args) + ")"
    if isinstance(node, A.ClaimExpr):
        return "claim(" + ", ".join(print_expr(a) for a in node.args) + ")"
    if isinstance(node, A.CodeArg):
        return print_statements(node.body)
    raise ValueError(f"not an expression: {node!r}")


def print_stmt(node: A.Node, depth: int = 0) -> str:
    if isinstance(node, A.GuardStmt):
        return print_expr(node.expr)
    if isinstance(node, A.AssignStmt):
        if node.op in ("add", "remove", "sub", "next", "append"):
            return f"{node.target}.{node.op}({print_expr(node.expr)})"
        target = node.target
        if node.index is not None:
            target += f"[{print_expr(node.index)}]"
        return f"{target} {node.op} {print_expr(node.expr)}"
    if isinstance(node, A.VerifyStmt):
        return f"verify({print_expr(node.signers)}, {print_expr(node.quorum)})"
    if isinstance(node, A.TransferStmt):
        return f"transfer({print_expr(node.to)}, {print_expr(node.value)})"
    if isinstance(node, A.ClaimStmt):
        return "claim(" + ", ".join(print_expr(a) for a in node.args) + ")"
    if isinstance(node, A.IsSettledStmt):
        return f"isSettled({print_expr(node.claim)})"
    if isinstance(node, A.ApplyStmt):
        return f"apply({print_expr(node.code)})"
    if isinstance(node, A.IfStmt):
        return f"if ({print_expr(node.cond)}) " + print_body(node.body, depth)
    if isinstance(node, A.SpliceStmt):
        return node.param
    if isinstance(node, A.CallStmt):
        return f"{print_expr(node.target)}.{node.block}(" + ", ".join(print_expr(a) for a in node.args) + ")"
    if isinstance(node, A.CreateContractStmt):
        if isinstance(node.template, A.Script):
            return "contract( " + print_members(node.template, inline=True) + " )"
        args = ""
        if node.args:
            args = "[" + ", ".join(print_expr(a) for a in node.args) + "]"
        return f"contract({node.template}{args})"
    if isinstance(node, A.CreateInstanceStmt):
        return f"instance({print_expr(node.contract)})"
    if isinstance(node, A.EllipsisStmt):
        return "..."
    raise ValueError(f"not a statement: {node!r}")


def print_statements(stmts: Iterable[A.Node]) -> str:
    """Single-line form used for quoted code values."""
    return "; ".join(print_stmt(s, -1) for s in stmts)


def print_body(stmts, depth: int) -> str:
    stmts = tuple(stmts)
    if depth < 0:
        return "{ " + "".join(print_stmt(s, -1) + "; " for s in stmts) + "}"
    pad = INDENT * (depth + 1)
    lines = ["{"]
    for s in stmts:
        lines.append(pad + print_stmt(s, depth + 1) + ";")
    lines.append(INDENT * depth + "}")
    return "\n".join(lines)


def _member_lines(script: A.Script, depth: int) -> List[str]:
    pad = INDENT * depth
    out = []
    for d in script.contract_fields:
        out.append(f"{pad}{d.name} : {d.type};")
    for d in script.instance_fields:
        out.append(f"{pad}instance {d.name} : {d.type};")
    if script.elided:
        out.append(f"{pad}...")
    if script.contract_constructor is not None:
        out.append(f"{pad}constructor " + print_body(script.contract_constructor, depth))
    if script.instance_constructor is not None:
        out.append(f"{pad}instance constructor " + print_body(script.instance_constructor, depth))
    for b in script.blocks:
        prefix = "instance " if b.is_instance else ""
        out.append(f"{pad}{prefix}{b.name}({', '.join(b.params)}) " + print_body(b.body, depth))
    return out


def print_members(script: A.Script, inline: bool = False) -> str:
    if inline:
        return " ".join(line.strip() if "\n" not in line else _flatten(line)
                        for line in _member_lines_inline(script))
    return "\n".join(_member_lines(script, 1))


def _member_lines_inline(script: A.Script) -> List[str]:
    out = []
    for d in script.contract_fields:
        out.append(f"{d.name} : {d.type};")
    for d in script.instance_fields:
        out.append(f"instance {d.name} : {d.type};")
    if script.elided:
        out.append("...")
    if script.contract_constructor is not None:
        out.append("constructor " + print_body(script.contract_constructor, -1))
    if script.instance_constructor is not None:
        out.append("instance constructor " + print_body(script.instance_constructor, -1))
    for b in script.blocks:
        prefix = "instance " if b.is_instance else ""
        out.append(f"{prefix}{b.name}({', '.join(b.params)}) " + print_body(b.body, -1))
    return out


def _flatten(text: str) -> str:
    return " ".join(part.strip() for part in text.splitlines())


def print_script(script: A.Script) -> str:
    lines = []
    if script.name is not None:
        header = script.name
        if script.template_params:
            header += "[" + ", ".join(script.template_params) + "]"
        lines.append(header + ":")
        lines.extend(_member_lines(script, 1))
    else:
        lines.extend(_member_lines(script, 0))
    return "\n".join(lines) + "\n"
