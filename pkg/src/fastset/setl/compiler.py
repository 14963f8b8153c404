"""Lowering of SETL blocks to primitive claims.

Reads of fields stay symbolic (``Field`` expressions) and are evaluated
when the claim is applied, so a block compiled once behaves correctly on
every replica whatever order that replica settles messages in.

Entry points:

* ``instantiate`` and ``link`` close a parsed script over template
  arguments and scenario aliases;
* ``load_script`` is the cached parse+instantiate used by validators;
* ``compile_call`` / ``compile_constructor`` produce the claims of a block;
* ``compile_user`` turns a client's statement list into the claims of its
  own block.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from ..claims import (
    CONTRACT,
    INSTANCE,
    USER,
    Apply,
    BlockCall,
    Claim,
    CreateContract,
    CreateInstance,
    DataClaim,
    FieldWrite,
    Guard,
    IsSettled,
    PublishScript,
    Transfer,
    Verify,
    When,
    script_digest,
)
from ..encoding import decode, encode
from ..expr import (
    BinOp,
    Call,
    DataDigest,
    EvalError,
    Expr,
    Field,
    ListOf,
    Lit,
    Not,
    Owner,
    SetOf,
    Time,
    evaluate,
)
from ..values import Address, Code, default_for_type
from . import ast as A
from .parser import parse, parse_statements
from .printer import print_script, print_statements

BUILTINS = ("time", "contract", "instance")


class CompileError(Exception):
    pass


class UnknownBlock(CompileError):
    pass


class Unauthorized(CompileError):
    def __init__(self, caller: Address, required_owner: Address) -> None:
        super().__init__(f"caller {caller!r} is not owned by {required_owner!r}")
        self.caller = caller
        self.required_owner = required_owner


class ArityMismatch(CompileError):
    pass


class UnboundParameter(CompileError):
    pass


# ------------------------------------------------------------- rewriting


def _rewrite(node: Any, fn) -> Any:
    """Bottom-up structural rewrite; ``fn`` may return a replacement or None."""
    if isinstance(node, tuple):
        out = []
        for x in node:
            y = _rewrite(x, fn)
            if isinstance(y, _Splice):
                out.extend(y.items)
            else:
                out.append(y)
        return tuple(out)
    if isinstance(node, A.Node) and dataclasses.is_dataclass(node):
        changes = {}
        for f in dataclasses.fields(node):
            if f.name == "span":
                continue
            old = getattr(node, f.name)
            if isinstance(old, (A.Node, tuple)):
                new = _rewrite(old, fn)
                if new is not old:
                    changes[f.name] = new
        if changes:
            node = dataclasses.replace(node, **changes)
        replacement = fn(node)
        return node if replacement is None else replacement
    return node


@dataclass(frozen=True)
class _Splice:
    items: tuple


def _substitute(body, values: Mapping[str, Any], bound: frozenset = frozenset()):
    """Replace free occurrences of names in ``values`` by constants."""

    def fn(node):
        if isinstance(node, A.Name) and node.id in values and node.id not in bound:
            return A.Const(values[node.id], span=node.span)
        if isinstance(node, (A.SetLit, A.ListLit)):
            from .parser import fold
            return fold(node)
        return None

    return _rewrite(body, fn)


def _map_bodies(script: A.Script, fn) -> A.Script:
    """Apply ``fn(body, params)`` to every statement list of a script."""
    return dataclasses.replace(
        script,
        contract_constructor=None if script.contract_constructor is None
        else fn(script.contract_constructor, ()),
        instance_constructor=None if script.instance_constructor is None
        else fn(script.instance_constructor, ()),
        blocks=tuple(dataclasses.replace(b, body=fn(b.body, b.params)) for b in script.blocks),
    )


def instantiate(script: A.Script, args) -> A.Script:
    """Substitute template arguments; the result has no template parameters."""
    params = script.template_params
    if isinstance(args, Mapping):
        missing = [p for p in params if p not in args]
        if missing:
            raise UnboundParameter(f"no value for template parameter {missing[0]}")
        values = {p: args[p] for p in params}
    else:
        args = tuple(args)
        if len(args) != len(params):
            raise ArityMismatch(f"template expects {len(params)} arguments, got {len(args)}")
        values = dict(zip(params, args))
    if not values:
        return dataclasses.replace(script, template_params=())
    closed = _map_bodies(script, lambda body, bparams: _substitute(body, values, frozenset(bparams)))
    return dataclasses.replace(closed, template_params=())


def _field_names(script: A.Script) -> frozenset:
    return frozenset(script.field_names(False)) | frozenset(script.field_names(True))


def link(script: A.Script, names: Mapping[str, Any]) -> A.Script:
    """Resolve free names (scenario aliases such as ``alice``) to constants."""
    reserved = frozenset(script.template_params) | _field_names(script) | frozenset(BUILTINS)
    usable = {k: v for k, v in names.items() if k not in reserved}
    return _map_bodies(script, lambda body, bparams: _substitute(body, usable, frozenset(bparams)))


def link_statements(stmts, names: Mapping[str, Any]):
    return _substitute(tuple(stmts), dict(names))


def free_names(script: A.Script) -> List[str]:
    """Names a script body uses that nothing binds (sorted, unique)."""
    fields = _field_names(script) | frozenset(script.template_params) | frozenset(BUILTINS)
    found = set()

    def scan(body, params):
        bound = fields | frozenset(params)

        def fn(node):
            if isinstance(node, A.Name) and node.id not in bound:
                found.add(node.id)
            if isinstance(node, A.SpliceStmt) and node.param not in bound:
                found.add(node.param)
            if isinstance(node, A.AssignStmt) and node.target not in fields:
                found.add(node.target)
            return None

        _rewrite(body, fn)
        return body

    _map_bodies(script, scan)
    return sorted(found)


# ---------------------------------------------------------------- loading


@dataclass(frozen=True)
class LoadedScript:
    script: A.Script

    def contract_defaults(self) -> Dict[str, Any]:
        return {d.name: default_for_type(d.type) for d in self.script.contract_fields}

    def instance_defaults(self) -> Dict[str, Any]:
        return {d.name: default_for_type(d.type) for d in self.script.instance_fields}


@lru_cache(maxsize=1024)
def _load(source: str, args_enc: bytes) -> LoadedScript:
    script = instantiate(parse(source), decode(args_enc))
    unbound = free_names(script)
    if unbound:
        raise CompileError(f"unbound names in script: {', '.join(unbound)}")
    return LoadedScript(script)


def load_script(source: str, template_args) -> LoadedScript:
    return _load(source, encode(tuple(template_args)))


# ------------------------------------------------------------- lowering


@dataclass(frozen=True)
class Scope:
    issuer: Address
    contract: Optional[Address] = None
    instance: Optional[Address] = None
    params: Mapping[str, Any] = dataclasses.field(default_factory=dict)
    contract_fields: frozenset = frozenset()
    instance_fields: frozenset = frozenset()
    user: bool = False  # client-side compilation of a user's own block


def _closed(scope: Scope) -> Scope:
    """Environment for quoted code: no fields, params or contract names."""
    return Scope(scope.issuer)


def compile_expr(node: A.Node, scope: Scope) -> Expr:
    if isinstance(node, A.Const):
        return Lit(node.value)
    if isinstance(node, A.Name):
        name = node.id
        if name in scope.params:
            return Lit(scope.params[name])
        if scope.instance is not None and name in scope.instance_fields:
            return Field(Lit(scope.instance), name)
        if name in scope.contract_fields:
            return Field(Lit(scope.contract), name)
        if name == "time":
            return Time()
        if name == "contract" and scope.contract is not None:
            return Lit(scope.contract)
        if name == "instance" and scope.instance is not None:
            return Lit(scope.instance)
        raise CompileError(f"unbound name {name}")
    if isinstance(node, A.Member):
        obj = compile_expr(node.obj, scope)
        if node.name == "owner":
            return Owner(obj)
        if node.name == "last":
            return Call("last", (obj,))
        return Field(obj, node.name)
    if isinstance(node, A.Index):
        return Call("index", (compile_expr(node.obj, scope), compile_expr(node.key, scope)))
    if isinstance(node, A.Unary):
        return Not(compile_expr(node.operand, scope))
    if isinstance(node, A.Binary):
        return BinOp(node.op, compile_expr(node.left, scope), compile_expr(node.right, scope))
    if isinstance(node, A.SetLit):
        return SetOf(tuple(compile_expr(i, scope) for i in node.items))
    if isinstance(node, A.ListLit):
        return ListOf(tuple(compile_expr(i, scope) for i in node.items))
    if isinstance(node, A.FuncCall):
        return Call(node.name, tuple(compile_expr(a, scope) for a in node.args))
    if isinstance(node, A.ClaimExpr):
        if not node.args:
            raise CompileError("claim() needs at least a tag")
        args = [compile_expr(a, scope) for a in node.args]
        return DataDigest(args[0], tuple(args[1:]))
    if isinstance(node, A.CodeArg):
        return Lit(Code(print_statements(_quote(node.body, scope))))
    raise CompileError(f"not an expression: {type(node).__name__}")


def _quote(body, scope: Scope):
    """Close a statement list over the current parameters before quoting it."""

    def fn(node):
        if isinstance(node, A.SpliceStmt) and node.param in scope.params:
            value = scope.params[node.param]
            if isinstance(value, Code):
                return _Splice(parse_statements(value.source))
            return A.GuardStmt(A.Const(value))
        if isinstance(node, A.Name) and node.id in scope.params:
            value = scope.params[node.id]
            if isinstance(value, Code):
                raise CompileError(f"code parameter {node.id} used as a value")
            return A.Const(value, span=node.span)
        return None

    return _rewrite(tuple(body), fn)


def _const(node: A.Node, scope: Scope):
    expr = compile_expr(node, scope)
    try:
        return evaluate(expr, _NoState(), _NoTime())
    except EvalError as exc:
        raise CompileError(f"not a constant: {exc}") from exc


class _NoState:
    def field(self, addr, name):
        raise EvalError("field reads are not constant")

    owner = balance = field


class _NoTime:
    @property
    def timestamp(self):
        raise EvalError("time is not constant")


def compile_code(code: Code, scope: Scope) -> Tuple[Claim, ...]:
    try:
        stmts = parse_statements(code.source)
    except Exception as exc:
        raise CompileError(f"quoted code does not parse: {exc}") from exc
    return compile_body(stmts, _closed(scope))


def _field_owner(name: str, scope: Scope) -> Address:
    if scope.instance is not None and name in scope.instance_fields:
        return scope.instance
    if name in scope.contract_fields:
        return scope.contract
    raise CompileError(f"assignment to undeclared field {name}")


_METHOD_FN = {"add": "set_add", "remove": "set_remove", "sub": "set_remove",
              "next": "list_append", "append": "list_append"}


def compile_stmt(node: A.Node, scope: Scope) -> List[Claim]:
    me = scope.issuer
    if isinstance(node, A.GuardStmt):
        return [Guard(me, compile_expr(node.expr, scope))]
    if isinstance(node, A.AssignStmt):
        owner = _field_owner(node.target, scope)
        current: Expr = Field(Lit(owner), node.target)
        rhs = compile_expr(node.expr, scope)
        if node.op in _METHOD_FN:
            if node.index is not None:
                raise CompileError("collection methods apply to whole fields")
            return [FieldWrite(me, owner, node.target, Call(_METHOD_FN[node.op], (current, rhs)))]
        key = compile_expr(node.index, scope) if node.index is not None else None
        old = Call("index", (current, key)) if key is not None else current
        if node.op in (":=", "="):
            new = rhs
        elif node.op == "+=":
            new = BinOp("+", old, rhs)
        elif node.op == "-=":
            new = BinOp("-", old, rhs)
        else:
            raise CompileError(f"unknown assignment {node.op}")
        if key is not None:
            new = Call("map_set", (current, key, new))
        return [FieldWrite(me, owner, node.target, new)]
    if isinstance(node, A.VerifyStmt):
        return [Verify(me, compile_expr(node.signers, scope), compile_expr(node.quorum, scope))]
    if isinstance(node, A.TransferStmt):
        return [Transfer(me, compile_expr(node.to, scope), compile_expr(node.value, scope))]
    if isinstance(node, A.ClaimStmt):
        if not node.args:
            raise CompileError("claim() needs at least a tag")
        args = [compile_expr(a, scope) for a in node.args]
        return [DataClaim(me, args[0], tuple(args[1:]))]
    if isinstance(node, A.IsSettledStmt):
        return [IsSettled(me, compile_expr(node.claim, scope))]
    if isinstance(node, A.ApplyStmt):
        code = _const(node.code, scope)
        if not isinstance(code, Code):
            raise CompileError("apply() expects quoted code")
        return [Apply(me, compile_code(code, scope))]
    if isinstance(node, A.IfStmt):
        return [When(me, compile_expr(node.cond, scope), compile_body(node.body, scope))]
    if isinstance(node, A.SpliceStmt):
        if node.param not in scope.params:
            raise CompileError(f"unbound name {node.param}")
        value = scope.params[node.param]
        if isinstance(value, Code):
            return list(compile_code(value, scope))
        if isinstance(value, bool):
            return [Guard(me, Lit(value))]
        raise CompileError(f"parameter {node.param} is neither code nor a boolean")
    if isinstance(node, A.CallStmt):
        target = compile_expr(node.target, scope)
        args = tuple(compile_expr(a, scope) for a in node.args)
        return [BlockCall(me, target, node.block, args)]
    if isinstance(node, A.EllipsisStmt):
        return []
    if isinstance(node, (A.CreateContractStmt, A.CreateInstanceStmt)):
        raise CompileError("only user accounts create contracts and instances")
    raise CompileError(f"not a statement: {type(node).__name__}")


def compile_body(stmts, scope: Scope) -> Tuple[Claim, ...]:
    out: List[Claim] = []
    for s in stmts:
        out.extend(compile_stmt(s, scope))
    return tuple(out)


def _scope_for(loaded: LoadedScript, issuer, contract, instance, params) -> Scope:
    s = loaded.script
    return Scope(issuer, contract, instance, params,
                 frozenset(s.field_names(False)),
                 frozenset(s.field_names(True)) if instance is not None else frozenset())


def compile_constructor(loaded: LoadedScript, issuer: Address, contract: Address,
                        instance_addr: Optional[Address], instance: bool = False) -> Tuple[Claim, ...]:
    body = loaded.script.instance_constructor if instance else loaded.script.contract_constructor
    if body is None:
        return ()
    return compile_body(body, _scope_for(loaded, issuer, contract, instance_addr, {}))


@lru_cache(maxsize=4096)
def _compile_block(source: str, targs_enc: bytes, block: str, target: Address,
                   contract: Address, instance: Optional[Address], args_enc: bytes):
    loaded = _load(source, targs_enc)
    bdef = loaded.script.block(block)
    params = dict(zip(bdef.params, decode(args_enc)))
    return compile_body(bdef.body, _scope_for(loaded, target, contract, instance, params))


def compile_call(state, caller: Address, target: Address, block: str, args: Sequence[Any],
                 ctx=None) -> Tuple[Claim, ...]:
    """Claims of ``target.block(args)`` called by ``caller``, issued by ``target``.

    Contract blocks need the caller to belong to the contract owner;
    instance blocks need it to belong to the instance owner.  Raises
    ``UnknownBlock``, ``Unauthorized`` or ``ArityMismatch``.
    """
    acc = state.account(target)
    if acc.kind == USER or not state.exists(target):
        raise UnknownBlock(f"{target!r} is not a contract-based account")
    if acc.kind == CONTRACT:
        contract, instance, holder = target, None, acc
    else:
        contract, instance = acc.parent_contract, target
        holder = state.account(contract)
    source = state.script(holder.script_digest)
    if source is None:
        raise CompileError("script of contract is missing")
    targs_enc = encode(tuple(holder.template_args))
    loaded = _load(source, targs_enc)
    bdef = loaded.script.block(block)
    if bdef is None or bdef.is_instance != (acc.kind == INSTANCE):
        raise UnknownBlock(f"no {'instance ' if acc.kind == INSTANCE else ''}block {block}")
    if state.root_owner(caller) != acc.owner:
        raise Unauthorized(caller, acc.owner)
    args = tuple(args)
    if len(args) != len(bdef.params):
        raise ArityMismatch(f"{block} expects {len(bdef.params)} arguments, got {len(args)}")
    return _compile_block(source, targs_enc, block, target, contract, instance, encode(args))


# ------------------------------------------------------------ client side


def publishable_source(source_or_script, names: Mapping[str, Any]) -> str:
    """Canonical text of a template with scenario aliases linked in."""
    script = source_or_script if isinstance(source_or_script, A.Script) else parse(source_or_script)
    return print_script(link(script, names))


def compile_user(stmts, issuer: Address, names: Mapping[str, Any],
                 templates: Mapping[str, str] = None) -> Tuple[Claim, ...]:
    """Claims for a user-driven account's own block.

    ``names`` maps aliases to values; ``templates`` maps template names to
    source text for ``contract(NAME[args])``.  Creating a contract also
    publishes its (linked, canonical) script text.
    """
    templates = templates or {}
    if isinstance(stmts, str):
        stmts = parse_statements(stmts)
    scope = Scope(issuer, user=True)
    out: List[Claim] = []
    for s in stmts:
        if not isinstance(s, A.CreateContractStmt):
            s = link_statements((s,), names)[0]
        if isinstance(s, A.CreateContractStmt):
            if isinstance(s.template, A.Script):
                source = publishable_source(s.template, names)
            else:
                if s.template not in templates:
                    raise CompileError(f"unknown template {s.template}")
                source = publishable_source(templates[s.template], names)
            targs = tuple(_const(a, scope) for a in link_statements(s.args, names))
            out.append(PublishScript(issuer, source))
            out.append(CreateContract(issuer, script_digest(source), targs))
        elif isinstance(s, A.CreateInstanceStmt):
            target = _const(s.contract, scope)
            if not isinstance(target, Address):
                raise CompileError("instance() expects a contract address")
            out.append(CreateInstance(issuer, target))
        elif isinstance(s, A.AssignStmt):
            raise CompileError("user accounts have no fields")
        else:
            out.extend(compile_stmt(s, scope))
    return tuple(out)
