"""Claims, global state and the partial denotation of claims.

``apply_claim(c, s, ctx)`` is the denotation of ``c`` in ``s``; a claim is
valid exactly when applying it succeeds.  ``apply_block`` folds a whole
block of one issuer atomically: either every claim applies, in order, or
the block is invalid and nothing is exposed.

States are immutable.  Applying works on a private scratch copy that is
frozen into a new ``GlobalState`` at the end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, Optional, Tuple, Union

from .encoding import Digest, digest, record
from .expr import (
    EvalError,
    Expr,
    Lit,
    data_digest,
    evaluate,
    lit,
    show,
)
from .values import EMPTY_MAP, Address, FrozenMap, render, type_name

USER = "user"
CONTRACT = "contract"
INSTANCE = "instance"

MAX_CALL_DEPTH = 16


class ClaimInvalid(Exception):
    """Internal signal: the claim being applied has no denotation here."""


class PreconditionViolated(Exception):
    """``apply_claim`` was called on a claim that is not valid."""


# --------------------------------------------------------------------------
# claim kinds


class Claim:
    __slots__ = ()
    issuer: Address


@record
@dataclass(frozen=True)
class Transfer(Claim):
    issuer: Address
    to: Expr
    value: Expr


@record
@dataclass(frozen=True)
class FieldWrite(Claim):
    issuer: Address
    owner: Address
    field: str
    expr: Expr


@record
@dataclass(frozen=True)
class Guard(Claim):
    issuer: Address
    expr: Expr


@record
@dataclass(frozen=True)
class Verify(Claim):
    issuer: Address
    signers: Expr
    quorum: Expr


@record
@dataclass(frozen=True)
class DataClaim(Claim):
    issuer: Address
    tag: Expr
    payload: Tuple[Expr, ...]


@record
@dataclass(frozen=True)
class IsSettled(Claim):
    issuer: Address
    claim_digest: Expr


@record
@dataclass(frozen=True)
class PublishScript(Claim):
    """Stores SETL source in the content-addressed script table."""

    issuer: Address
    source: str


@record
@dataclass(frozen=True)
class CreateContract(Claim):
    issuer: Address
    script_digest: bytes
    template_args: Tuple[Any, ...]


@record
@dataclass(frozen=True)
class CreateInstance(Claim):
    issuer: Address
    contract: Address


@record
@dataclass(frozen=True)
class BlockCall(Claim):
    issuer: Address
    target: Expr
    block: str
    args: Tuple[Expr, ...]


@record
@dataclass(frozen=True)
class Apply(Claim):
    issuer: Address
    inner: Tuple[Claim, ...]


@record
@dataclass(frozen=True)
class When(Claim):
    """Conditional group: valid if ``cond`` is false, else iff ``body`` is."""

    issuer: Address
    cond: Expr
    body: Tuple[Claim, ...]


CREATION_KINDS = (CreateContract, CreateInstance)


def transfer(issuer: Address, to, value) -> Transfer:
    return Transfer(issuer, lit(to), lit(value))


def guard(issuer: Address, expr) -> Guard:
    return Guard(issuer, lit(expr))


def verify(issuer: Address, signers, quorum) -> Verify:
    if isinstance(signers, (set, list, tuple)):
        signers = frozenset(signers)
    return Verify(issuer, lit(signers), lit(quorum))


def data_claim(issuer: Address, tag, *payload) -> DataClaim:
    return DataClaim(issuer, lit(tag), tuple(lit(p) for p in payload))


def block_call(issuer: Address, target: Address, block: str, *args) -> BlockCall:
    return BlockCall(issuer, lit(target), block, tuple(lit(a) for a in args))


def script_digest(source: str) -> bytes:
    return digest(("script", source))


# --------------------------------------------------------------------------
# state


@record
@dataclass(frozen=True)
class AccountData:
    kind: str
    owner: Address
    parent_contract: Optional[Address] = None
    script_digest: Optional[bytes] = None
    template_args: Tuple[Any, ...] = ()
    balance: int = 0
    fields: FrozenMap = EMPTY_MAP


def user_account(addr: Address, balance: int = 0) -> AccountData:
    return AccountData(USER, addr, balance=balance)


@record
@dataclass(frozen=True)
class GlobalState:
    accounts: FrozenMap = EMPTY_MAP
    settled_digests: frozenset = frozenset()
    scripts: FrozenMap = EMPTY_MAP

    # read interface shared with the scratch copy used while applying

    def account(self, addr: Address) -> AccountData:
        acc = self.accounts.get(addr)
        return acc if acc is not None else user_account(addr)

    def exists(self, addr: Address) -> bool:
        return addr in self.accounts

    def balance(self, addr: Address) -> int:
        return self.account(addr).balance

    def owner(self, addr: Address) -> Address:
        return self.account(addr).owner

    def root_owner(self, addr: Address) -> Address:
        return self.account(addr).owner

    def field(self, addr: Address, name: str):
        return _read_field(self.account(addr), addr, name)

    def script(self, d: bytes) -> Optional[str]:
        return self.scripts.get(d)

    def is_settled(self, d: bytes) -> bool:
        return d in self.settled_digests

    def digest(self) -> Digest:
        return digest(self)

    def total_balance(self) -> int:
        return sum(a.balance for a in self.accounts.values())


def _read_field(acc: AccountData, addr: Address, name: str):
    if acc.kind == USER or name not in acc.fields:
        raise EvalError(f"no field {name} on {render(addr)}")
    return acc.fields[name]


def genesis(balances: Optional[Dict[Address, int]] = None) -> GlobalState:
    accounts = {}
    for addr, bal in (balances or {}).items():
        if bal < 0:
            raise ValueError("negative genesis balance")
        if bal:
            accounts[addr] = user_account(addr, bal)
    return GlobalState(FrozenMap(accounts))


def _canonical(acc: AccountData) -> bool:
    """Users with nothing to remember are left implicit."""
    return not (acc.kind == USER and acc.balance == 0)


@dataclass(frozen=True)
class EvalContext:
    """Message-level facts a claim may consult.

    ``verifiers`` is the set T of verifier signatures attached to the
    message; ``sender`` is the key that signed it.  ``account`` and
    ``nonce`` identify the message for address derivation.
    """

    timestamp: int = 0
    verifiers: frozenset = frozenset()
    sender: Optional[Address] = None
    account: Optional[Address] = None
    nonce: int = 0
    check_verify: bool = True

    def signatories(self, root_owner: Address) -> frozenset:
        signer = self.sender if self.sender is not None else root_owner
        return self.verifiers | {signer}


DEFAULT_CTX = EvalContext()


def derive_address(creator: Address, nonce: int, seq: int, kind: str) -> Address:
    h = hashlib.sha256(b"fastset/derive\x00" + digest((creator, nonce, seq, kind)))
    return Address(h.digest())


class _Scratch:
    """Mutable working copy of a state during one application."""

    def __init__(self, state: GlobalState) -> None:
        self.base = state
        self.accounts: Dict[Address, Optional[AccountData]] = {}
        self.settled = set()
        self.scripts: Dict[bytes, str] = {}
        self.created = 0
        self.depth = 0
        self.branch = 0  # > 0 while applying the body of a taken conditional

    def account(self, addr: Address) -> AccountData:
        if addr in self.accounts:
            acc = self.accounts[addr]
            return acc if acc is not None else user_account(addr)
        return self.base.account(addr)

    def exists(self, addr: Address) -> bool:
        if addr in self.accounts:
            return self.accounts[addr] is not None
        return self.base.exists(addr)

    def put(self, addr: Address, acc: AccountData) -> None:
        self.accounts[addr] = acc if _canonical(acc) else None

    def balance(self, addr: Address) -> int:
        return self.account(addr).balance

    def owner(self, addr: Address) -> Address:
        return self.account(addr).owner

    def root_owner(self, addr: Address) -> Address:
        return self.account(addr).owner

    def field(self, addr: Address, name: str):
        return _read_field(self.account(addr), addr, name)

    def script(self, d: bytes) -> Optional[str]:
        return self.scripts.get(d) or self.base.script(d)

    def is_settled(self, d: bytes) -> bool:
        return d in self.settled or self.base.is_settled(d)

    def freeze(self) -> GlobalState:
        base = self.base
        accounts = base.accounts
        if self.accounts:
            d = dict(accounts)
            for k, v in self.accounts.items():
                if v is None:
                    d.pop(k, None)
                else:
                    d[k] = v
            accounts = FrozenMap(d)
        settled = base.settled_digests | self.settled if self.settled else base.settled_digests
        scripts = base.scripts
        if self.scripts:
            d2 = dict(scripts)
            d2.update(self.scripts)
            scripts = FrozenMap(d2)
        return GlobalState(accounts, settled, scripts)


# --------------------------------------------------------------------------
# semantics


def _eval(expr: Expr, s: _Scratch, ctx: EvalContext):
    return evaluate(expr, s, ctx)


def _want(value, kind: str, what: str):
    if type_name(value) != kind:
        raise ClaimInvalid(f"{what}: expected {kind}, got {type_name(value)}")
    return value


def _signer_set(value) -> frozenset:
    if type_name(value) == "Address":
        return frozenset([value])
    if type_name(value) in ("Set", "List"):
        return frozenset(value)
    raise ClaimInvalid(f"verify signers must be addresses, got {type_name(value)}")


def _apply(c: Claim, s: _Scratch, ctx: EvalContext) -> None:
    try:
        _apply_inner(c, s, ctx)
    except EvalError as exc:
        raise ClaimInvalid(str(exc)) from exc
    # Claims inside a taken branch are effects of the conditional, not
    # settled claims in their own right: whether the branch runs depends on
    # the state, and the settled set must not.
    if not s.branch:
        s.settled.add(digest(c))


def _apply_inner(c: Claim, s: _Scratch, ctx: EvalContext) -> None:
    if isinstance(c, Transfer):
        to = _want(_eval(c.to, s, ctx), "Address", "transfer recipient")
        value = _want(_eval(c.value, s, ctx), "Int", "transfer value")
        if value < 0:
            raise ClaimInvalid("negative transfer")
        src = s.account(c.issuer)
        if src.balance < value:
            raise ClaimInvalid("insufficient balance")
        if to == c.issuer:
            return
        s.put(c.issuer, replace(src, balance=src.balance - value))
        dst = s.account(to)
        s.put(to, replace(dst, balance=dst.balance + value))
    elif isinstance(c, Guard):
        if _eval(c.expr, s, ctx) is not True:
            raise ClaimInvalid("guard is false")
    elif isinstance(c, Verify):
        if not ctx.check_verify:
            return
        signers = _signer_set(_eval(c.signers, s, ctx))
        quorum = _want(_eval(c.quorum, s, ctx), "Int", "verify quorum")
        if quorum < 1:
            raise ClaimInvalid("verify quorum must be positive")
        present = ctx.signatories(s.root_owner(c.issuer))
        if len(present & signers) < quorum:
            raise ClaimInvalid("verifier quorum not reached")
    elif isinstance(c, FieldWrite):
        owner = s.account(c.owner)
        if owner.kind == USER:
            raise ClaimInvalid("fields live on contract-based accounts")
        allowed = c.issuer == c.owner or (
            owner.kind == CONTRACT and s.account(c.issuer).parent_contract == c.owner)
        if not allowed:
            raise ClaimInvalid("field write not permitted for issuer")
        if c.field not in owner.fields:
            raise ClaimInvalid(f"undeclared field {c.field}")
        value = _eval(c.expr, s, ctx)
        owner = s.account(c.owner)
        s.put(c.owner, replace(owner, fields=owner.fields.set(c.field, value)))
    elif isinstance(c, DataClaim):
        tag = _eval(c.tag, s, ctx)
        payload = tuple(_eval(e, s, ctx) for e in c.payload)
        s.settled.add(data_digest(tag, payload))
    elif isinstance(c, IsSettled):
        d = _want(_eval(c.claim_digest, s, ctx), "Bytes", "isSettled argument")
        if not s.is_settled(d):
            raise ClaimInvalid("claim not settled")
    elif isinstance(c, PublishScript):
        from .setl.compiler import load_script
        from .setl.parser import ParseError

        try:
            load_script(c.source, ())
        except ParseError as exc:
            raise ClaimInvalid(f"script does not parse: {exc}") from exc
        except Exception:
            pass  # templates with parameters load fine once instantiated
        s.scripts[script_digest(c.source)] = c.source
    elif isinstance(c, CreateContract):
        _create_contract(c, s, ctx)
    elif isinstance(c, CreateInstance):
        _create_instance(c, s, ctx)
    elif isinstance(c, BlockCall):
        _block_call(c, s, ctx)
    elif isinstance(c, Apply):
        for inner in c.inner:
            if inner.issuer != c.issuer:
                raise ClaimInvalid("apply over claims of another issuer")
            _apply(inner, s, ctx)
    elif isinstance(c, When):
        cond = _eval(c.cond, s, ctx)
        if type_name(cond) != "Bool":
            raise ClaimInvalid("if condition is not boolean")
        if cond:
            s.branch += 1
            try:
                for inner in c.body:
                    if inner.issuer != c.issuer:
                        raise ClaimInvalid("conditional over claims of another issuer")
                    _apply(inner, s, ctx)
            finally:
                s.branch -= 1
    else:
        raise ClaimInvalid(f"unknown claim kind {type(c).__name__}")


def _fresh_address(s: _Scratch, ctx: EvalContext, issuer: Address, kind: str) -> Address:
    creator = ctx.account if ctx.account is not None else issuer
    addr = derive_address(creator, ctx.nonce, s.created, kind)
    s.created += 1
    if s.exists(addr):
        raise ClaimInvalid("derived address already in use")
    return addr


def _run_body(claims: Iterable[Claim], s: _Scratch, ctx: EvalContext) -> None:
    s.depth += 1
    try:
        if s.depth > MAX_CALL_DEPTH:
            raise ClaimInvalid("call depth exceeded")
        for inner in claims:
            _apply(inner, s, ctx)
    finally:
        s.depth -= 1


def _create_contract(c: CreateContract, s: _Scratch, ctx: EvalContext) -> None:
    from .setl.compiler import CompileError, compile_constructor, load_script

    if s.account(c.issuer).kind != USER:
        raise ClaimInvalid("only user accounts create contracts")
    source = s.script(c.script_digest)
    if source is None:
        raise ClaimInvalid("unknown script")
    try:
        script = load_script(source, tuple(c.template_args))
    except Exception as exc:
        raise ClaimInvalid(f"cannot instantiate script: {exc}") from exc
    addr = _fresh_address(s, ctx, c.issuer, CONTRACT)
    s.put(addr, AccountData(
        CONTRACT, c.issuer, None, c.script_digest, tuple(c.template_args), 0,
        FrozenMap(script.contract_defaults())))
    try:
        body = compile_constructor(script, addr, addr, None, instance=False)
    except CompileError as exc:
        raise ClaimInvalid(str(exc)) from exc
    _run_body(body, s, ctx)


def _create_instance(c: CreateInstance, s: _Scratch, ctx: EvalContext) -> None:
    from .setl.compiler import CompileError, compile_constructor

    if s.account(c.issuer).kind != USER:
        raise ClaimInvalid("only user accounts create instances")
    parent = s.account(c.contract)
    if parent.kind != CONTRACT or not s.exists(c.contract):
        raise ClaimInvalid("instance of a non-contract")
    script = _script_of(s, c.contract)
    addr = _fresh_address(s, ctx, c.issuer, INSTANCE)
    s.put(addr, AccountData(INSTANCE, c.issuer, c.contract, None, (), 0,
                            FrozenMap(script.instance_defaults())))
    try:
        body = compile_constructor(script, addr, c.contract, addr, instance=True)
    except CompileError as exc:
        raise ClaimInvalid(str(exc)) from exc
    _run_body(body, s, ctx)


def _script_of(s, contract: Address):
    from .setl.compiler import load_script

    acc = s.account(contract)
    source = s.script(acc.script_digest)
    if source is None:
        raise ClaimInvalid("contract script missing")
    return load_script(source, acc.template_args)


def _block_call(c: BlockCall, s: _Scratch, ctx: EvalContext) -> None:
    from .setl.compiler import CompileError, compile_call

    target = _want(_eval(c.target, s, ctx), "Address", "call target")
    args = tuple(_eval(a, s, ctx) for a in c.args)
    try:
        body = compile_call(s, c.issuer, target, c.block, args, ctx)
    except CompileError as exc:
        raise ClaimInvalid(str(exc)) from exc
    _run_body(body, s, ctx)


@dataclass(frozen=True)
class Invalid:
    """Result of applying an invalid block: index of the first bad claim."""

    index: int
    reason: str = ""

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class ClaimBlock:
    claims: Tuple[Claim, ...]

    def __post_init__(self) -> None:
        claims = tuple(self.claims)
        object.__setattr__(self, "claims", claims)
        if not claims:
            raise ValueError("a claim block is non-empty")
        issuers = {c.issuer for c in claims}
        if len(issuers) != 1:
            raise ValueError("all claims in a block share one issuer")

    @property
    def issuer(self) -> Address:
        return self.claims[0].issuer

    def __iter__(self):
        return iter(self.claims)

    def __len__(self) -> int:
        return len(self.claims)


record(ClaimBlock)


def apply_claim(claim: Claim, state: GlobalState, ctx: EvalContext = DEFAULT_CTX) -> GlobalState:
    s = _Scratch(state)
    try:
        _apply(claim, s, ctx)
    except ClaimInvalid as exc:
        raise PreconditionViolated(str(exc)) from exc
    return s.freeze()


def try_apply(claim: Claim, state: GlobalState, ctx: EvalContext = DEFAULT_CTX) -> Optional[GlobalState]:
    """``apply_claim`` that returns ``None`` (bottom) instead of raising."""
    s = _Scratch(state)
    try:
        _apply(claim, s, ctx)
    except ClaimInvalid:
        return None
    return s.freeze()


def is_valid(claim: Claim, state: GlobalState, ctx: EvalContext = DEFAULT_CTX) -> bool:
    return try_apply(claim, state, ctx) is not None


def _top_level_check(claims, s: _Scratch) -> Optional[Invalid]:
    issuer = claims[0].issuer
    if s.account(issuer).kind == USER:
        return None
    for i, c in enumerate(claims):
        if not (isinstance(c, BlockCall) and isinstance(c.target, Lit) and c.target.value == issuer):
            return Invalid(i, "contract-based accounts only issue their own blocks")
    return None


def apply_block(block: Union[ClaimBlock, Iterable[Claim]], state: GlobalState,
                ctx: EvalContext = DEFAULT_CTX) -> Union[GlobalState, Invalid]:
    claims = block.claims if isinstance(block, ClaimBlock) else tuple(block)
    if not claims:
        return state
    if len({c.issuer for c in claims}) != 1:
        return Invalid(0, "mixed issuers")
    s = _Scratch(state)
    bad = _top_level_check(claims, s)
    if bad is not None:
        return bad
    for i, c in enumerate(claims):
        try:
            _apply(c, s, ctx)
        except ClaimInvalid as exc:
            return Invalid(i, str(exc))
    return s.freeze()


def apply_sequence(claims: Iterable[Claim], state: GlobalState,
                   ctx: EvalContext = DEFAULT_CTX) -> Optional[GlobalState]:
    """Sequence semantics claim by claim (issuers may differ); ``None`` if invalid."""
    for c in claims:
        state = try_apply(c, state, ctx)
        if state is None:
            return None
    return state


def show_claim(c: Claim) -> str:
    """One-line debug rendering of a claim."""
    who = "@" + c.issuer.short()
    if isinstance(c, Transfer):
        body = f"transfer({show(c.to)}, {show(c.value)})"
    elif isinstance(c, Guard):
        body = f"guard({show(c.expr)})"
    elif isinstance(c, Verify):
        body = f"verify({show(c.signers)}, {show(c.quorum)})"
    elif isinstance(c, FieldWrite):
        body = f"@{c.owner.short()}.{c.field} := {show(c.expr)}"
    elif isinstance(c, DataClaim):
        body = "claim(" + ", ".join(show(e) for e in (c.tag,) + c.payload) + ")"
    elif isinstance(c, IsSettled):
        body = f"isSettled({show(c.claim_digest)})"
    elif isinstance(c, PublishScript):
        body = f"publish(script {script_digest(c.source).hex()[:8]})"
    elif isinstance(c, CreateContract):
        body = f"contract({c.script_digest.hex()[:8]}, [{', '.join(render(a) for a in c.template_args)}])"
    elif isinstance(c, CreateInstance):
        body = f"instance(@{c.contract.short()})"
    elif isinstance(c, BlockCall):
        body = f"{show(c.target)}.{c.block}(" + ", ".join(show(a) for a in c.args) + ")"
    elif isinstance(c, Apply):
        body = "apply(" + "; ".join(show_claim(x) for x in c.inner) + ")"
    elif isinstance(c, When):
        body = f"if {show(c.cond)} {{" + "; ".join(show_claim(x) for x in c.body) + "}"
    else:
        body = repr(c)
    return f"<{body}>{who}"
