"""Scenario files: load, run and check.

A scenario is a YAML document (comments allowed) describing the
participants, the SETL templates they use, a list of scripted steps and
the assertions to check at the end.  The schema is documented in
``docs/scenarios.md``.

Steps run one after the other with a quiescence barrier in between: a
step starts once the event queue is empty, unless it names an absolute
start time with ``at``.  A ``parallel`` step starts several lanes at once;
inside a lane, each step starts when the previous one has certified or
given up.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from .claims import (
    CONTRACT,
    INSTANCE,
    ClaimBlock,
    CreateContract,
    CreateInstance,
    data_digest,
    derive_address,
    genesis,
)
from .client import (
    EQUIVOCATE_SAME_NONCE,
    FAILED,
    REPLAY_OLD_MESSAGE,
    WITHHOLD_CERTIFICATE,
    ByzantineClient,
    ClientActor,
    RetryPolicy,
    Submission,
)
from .crypto import KeyPair, QuorumConfig, check_certificate
from .encoding import digest
from .setl import ast as A
from .setl.compiler import CompileError, Scope, _const, compile_user, link_statements
from .setl.lexer import ParseError
from .setl.parser import parse_expr, parse_statements
from .simnet import (
    BYZANTINE_MODES,
    EQUIVOCATION_HELPER,
    Latency,
    LinkOverride,
    SimConfig,
    Simulation,
    TraceLog,
    fork_rng,
)
from .validator import SETTLED_INERT, ValidatorOptions
from .values import Address

log = logging.getLogger(__name__)

ROLES = ("client", "verifier", "byzantine-client")
STRATEGIES = (EQUIVOCATE_SAME_NONCE, WITHHOLD_CERTIFICATE, REPLAY_OLD_MESSAGE)
EXPECTATIONS = ("settled", "applied", "inert", "rejected", "stuck", "certified", "any")
STEP_KEYS = {"as", "do", "account", "bind", "verifiers", "verifier_quorum", "at", "expect",
             "withhold", "tag", "release", "replay", "respawn", "equivocate", "parallel",
             "check", "note"}


class ScenarioError(Exception):
    """A malformed scenario (bad schema, unknown alias, uncompilable step)."""

    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


@dataclass
class Participant:
    alias: str
    role: str = "client"
    balance: int = 0
    strategy: Optional[str] = None
    verifies: bool = True


@dataclass
class Scenario:
    name: str
    f: int = 1
    seed: int = 0
    sim: Dict[str, Any] = field(default_factory=dict)
    participants: List[Participant] = field(default_factory=list)
    templates: Dict[str, str] = field(default_factory=dict)
    constants: Dict[str, Any] = field(default_factory=dict)
    steps: List[Dict[str, Any]] = field(default_factory=list)
    checks: List[Any] = field(default_factory=list)
    path: Optional[Path] = None


# ------------------------------------------------------------------ loading


def _resolve_path(path) -> Path:
    p = Path(path)
    if p.is_dir():
        raise ScenarioError(f"{p} is a directory")
    if not p.exists():
        for ext in (".yaml", ".yml"):
            if p.with_name(p.name + ext).exists():
                return p.with_name(p.name + ext)
        raise ScenarioError(f"no scenario file {p}")
    return p


def load_scenario(path) -> Scenario:
    p = _resolve_path(path)
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{p}: not valid YAML: {exc}") from exc
    return scenario_from_dict(doc, base=p.parent, path=p)


def scenario_from_dict(doc: Mapping[str, Any], base: Optional[Path] = None,
                       path: Optional[Path] = None) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario must be a mapping")
    unknown = set(doc) - {"name", "f", "seed", "sim", "participants", "templates", "constants",
                          "steps", "checks", "description"}
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}")
    participants = []
    for entry in doc.get("participants") or []:
        if isinstance(entry, str):
            entry = {"alias": entry}
        p = Participant(entry["alias"], entry.get("role", "client"), int(entry.get("balance", 0)),
                        entry.get("strategy"), bool(entry.get("verifies", True)))
        if p.role not in ROLES:
            raise ScenarioError(f"participant {p.alias}: unknown role {p.role}")
        if p.role == "byzantine-client" and p.strategy not in STRATEGIES:
            raise ScenarioError(f"participant {p.alias}: unknown strategy {p.strategy}")
        participants.append(p)
    aliases = [p.alias for p in participants]
    if len(set(aliases)) != len(aliases):
        raise ScenarioError("duplicate participant alias")
    templates = {}
    for name, spec in (doc.get("templates") or {}).items():
        if isinstance(spec, Mapping) and "file" in spec:
            fp = (base or Path(".")) / spec["file"]
            if not fp.exists():
                raise ScenarioError(f"template {name}: missing file {fp}")
            templates[name] = fp.read_text()
        elif isinstance(spec, str):
            templates[name] = spec
        else:
            raise ScenarioError(f"template {name}: expected source text or {{file: ...}}")
    steps = list(doc.get("steps") or [])
    for i, s in enumerate(steps):
        _validate_step(s, f"step {i}", set(aliases))
    for chk in doc.get("checks") or []:
        _validate_check(chk)
    return Scenario(
        name=str(doc.get("name") or (path.stem if path else "scenario")),
        f=int(doc.get("f", 1)),
        seed=int(doc.get("seed", 0)),
        sim=dict(doc.get("sim") or {}),
        participants=participants,
        templates=templates,
        constants=dict(doc.get("constants") or {}),
        steps=steps,
        checks=list(doc.get("checks") or []),
        path=path,
    )


def _validate_step(s, where: str, aliases: set) -> None:
    if not isinstance(s, Mapping):
        raise ScenarioError(f"{where}: a step must be a mapping")
    unknown = set(s) - STEP_KEYS
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    if "parallel" in s:
        for j, lane in enumerate(s["parallel"]):
            for k, sub in enumerate(lane if isinstance(lane, list) else [lane]):
                _validate_step(sub, f"{where}.{j}.{k}", aliases)
        return
    actions = [k for k in ("do", "release", "replay", "respawn", "equivocate", "check") if k in s]
    if len(actions) != 1:
        raise ScenarioError(f"{where}: exactly one action expected, got {actions}")
    for chk in s.get("check") or ():
        _validate_check(chk)
    if actions[0] != "check":
        if s.get("as") not in aliases:
            raise ScenarioError(f"{where}: 'as' must name a participant, got {s.get('as')!r}")
    if s.get("expect", "settled") not in EXPECTATIONS:
        raise ScenarioError(f"{where}: unknown expectation {s.get('expect')}")


def _validate_check(chk) -> None:
    if isinstance(chk, str):
        name = chk
    elif isinstance(chk, Mapping) and len(chk) == 1:
        name = next(iter(chk))
    else:
        raise ScenarioError(f"bad check {chk!r}")
    if name not in CHECKS:
        raise ScenarioError(f"unknown check {name}")


def build_sim_config(scenario: Scenario, seed: int, **overrides) -> SimConfig:
    sim = dict(scenario.sim)
    sim.update({k: v for k, v in overrides.items() if v is not None})
    byz = {}
    for k, mode in (sim.get("byzantine_validators") or {}).items():
        idx = int(str(k).lstrip("v"))
        if mode not in BYZANTINE_MODES:
            raise ScenarioError(f"unknown Byzantine validator mode {mode}")
        byz[idx] = mode
    if len(byz) > scenario.f:
        raise ScenarioError("more Byzantine validators than f")
    links = tuple(LinkOverride(l.get("src"), l.get("dst"), l.get("kind"), int(l.get("extra_ms", 0)))
                  for l in sim.get("links") or ())
    drop = float(sim.get("drop_rate", 0.0))
    if not 0 <= drop < 1:
        raise ScenarioError("drop_rate must be in [0, 1)")
    resolution = sim.get("resolution", True)
    if isinstance(resolution, str):
        resolution = resolution.lower() in ("on", "true", "yes")
    options = ValidatorOptions(
        enforce_monotonicity_resolution=bool(resolution),
        timestamp_tolerance_ms=int(sim.get("timestamp_tolerance_ms", 300)),
        max_message_age_ms=int(sim.get("max_message_age_ms", 10_300)),
    )
    return SimConfig(
        seed=seed,
        latency=Latency.parse(sim.get("latency")),
        drop_rate=drop,
        duplication_rate=float(sim.get("duplication_rate", 0.0)),
        byzantine_validators=byz,
        horizon_ms=int(sim.get("horizon_ms", 3_600_000)),
        redelivery_ms=int(sim.get("redelivery_ms", 1_000)),
        links=links,
        validator_options=options,
    )


def effective_seed(scenario: Scenario, seed: Optional[int] = None) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("FASTSET_SEED")
    if env:
        return int(env)
    return scenario.seed


# ------------------------------------------------------------------ running


@dataclass
class StepRecord:
    where: str
    spec: Mapping[str, Any]
    submissions: List[Submission] = field(default_factory=list)


@dataclass
class ScenarioResult:
    name: str
    seed: int
    failures: List[str]
    runner: "Runner"

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def sim(self) -> Simulation:
        return self.runner.sim

    @property
    def trace(self) -> TraceLog:
        return self.runner.sim.trace

    def metrics(self) -> Dict[str, Any]:
        m = self.runner.sim.metrics
        m.certificates_formed = len(self.runner.all_certificates())
        return m.summary()


def validator_keys(n: int) -> List[KeyPair]:
    return [KeyPair.from_name(f"validator/{i}") for i in range(n)]


class Runner:
    """Drives one scenario through a ``Simulation``."""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 config: Optional[SimConfig] = None, **overrides) -> None:
        self.scenario = scenario
        self.seed = effective_seed(scenario, seed)
        self.config = config if config is not None else build_sim_config(scenario, self.seed, **overrides)
        self.config.seed = self.seed
        keys = validator_keys(3 * scenario.f + 1)
        self.quorum = QuorumConfig(tuple(k.address for k in keys), scenario.f)
        self.sim = Simulation(self.config, self.quorum)
        retry = scenario.sim.get("retry") or {}
        self.retry = RetryPolicy(int(retry.get("interval_ms", 500)), int(retry.get("max_attempts", 20)))

        self.keys: Dict[str, KeyPair] = {p.alias: KeyPair.from_name(p.alias) for p in scenario.participants}
        self.names: Dict[str, Any] = {a: k.address for a, k in self.keys.items()}
        self.owners: Dict[Address, str] = {}
        self.bound: Dict[str, Address] = {}
        balances = {self.keys[p.alias].address: p.balance for p in scenario.participants if p.balance}
        self.genesis = genesis(balances)

        byz_clients = [self.keys[p.alias].address for p in scenario.participants if p.role == "byzantine-client"]
        self.sim.add_validators(keys, self.genesis, helped=byz_clients)
        self.colluders = tuple(a.address for a in self.sim.validators if a.mode == EQUIVOCATION_HELPER)

        self.clients: Dict[str, ClientActor] = {}
        for p in scenario.participants:
            key = self.keys[p.alias]
            if p.role == "byzantine-client":
                actor = ByzantineClient(p.alias, key, self.quorum, self.sim, p.strategy,
                                        colluders=self.colluders, retry=self.retry)
            else:
                actor = ClientActor(p.alias, key, self.quorum, self.sim, self.retry)
            if not p.verifies:
                actor.verifier_policy = lambda m: False
            self.sim.attach(p.alias, actor)
            self.clients[p.alias] = actor

        for name, text in scenario.constants.items():
            self.names[name] = self.value(text, f"constant {name}")

        self.records: List[StepRecord] = []
        self.failures: List[str] = []
        self.settle_kinds: Dict[bytes, Dict[str, str]] = {}
        self.sim.settle_hooks.append(self._on_settle)
        self.rng = fork_rng(self.seed, "runner")

    # ------------------------------------------------------------ helpers

    def _on_settle(self, actor, event) -> None:
        self.settle_kinds.setdefault(event.digest, {})[actor.name] = event.kind

    def value(self, text, where: str = "value"):
        """Evaluate a YAML value: numbers and booleans as is, strings as SETL."""
        if isinstance(text, bool) or isinstance(text, int):
            return text
        if isinstance(text, list):
            return tuple(self.value(t, where) for t in text)
        try:
            node = parse_expr(str(text))
            node = link_statements((A.GuardStmt(node),), self.names)[0].expr
            return _const(node, Scope(None, user=True))
        except (ParseError, CompileError, Exception) as exc:
            raise ScenarioError(f"{where}: cannot evaluate {text!r}: {exc}") from exc

    def address(self, alias: str, where: str = "") -> Address:
        v = self.names.get(alias)
        if not isinstance(v, Address):
            raise ScenarioError(f"{where}: unknown account alias {alias!r}")
        return v

    def alias_of(self, addr: Address) -> str:
        for k, v in self.names.items():
            if v == addr:
                return k
        return addr.short()

    def honest(self):
        return self.sim.honest_validators()

    def all_certificates(self):
        out = []
        for c in self.clients.values():
            out.extend(c.certificates)
        return out

    def published(self) -> Dict[bytes, int]:
        """When each certificate first went out to the validators."""
        out: Dict[bytes, int] = {}
        for c in self.clients.values():
            for d, t in c.published.items():
                out[d] = min(t, out.get(d, t))
        return out

    # ------------------------------------------------------------ steps

    def _issuing_account(self, spec, stmts, who: str, where: str) -> Address:
        if "account" in spec:
            return self.address(spec["account"], where)
        if len(stmts) == 1 and isinstance(stmts[0], A.CallStmt) and isinstance(stmts[0].target, A.Name):
            target = self.names.get(stmts[0].target.id)
            if isinstance(target, Address) and self.owners.get(target) == who:
                return target
        return self.keys[who].address

    def _prepare(self, spec, where: str, text: Optional[str] = None):
        """Return ``make(actor) -> Submission`` for a ``do`` step."""
        who = spec["as"]
        text = spec["do"] if text is None else text
        try:
            stmts = parse_statements(text)
        except ParseError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        verifiers = tuple(self.address(v, where) for v in spec.get("verifiers", ()))
        quorum = int(spec.get("verifier_quorum", len(verifiers)))
        binds = spec.get("bind") or []
        if isinstance(binds, str):
            binds = [binds]

        def block_for(account: Address) -> ClaimBlock:
            try:
                claims = compile_user(stmts, account, self.names, self.scenario.templates)
            except CompileError as exc:
                raise ScenarioError(f"{where}: {exc}") from exc
            return ClaimBlock(claims)

        def after_sign(account: Address, msg, block: ClaimBlock) -> None:
            creates = [c for c in block.claims if isinstance(c, (CreateContract, CreateInstance))]
            if len(binds) > len(creates):
                raise ScenarioError(f"{where}: {len(binds)} aliases to bind, {len(creates)} creations")
            for i, alias in enumerate(binds):
                kind = CONTRACT if isinstance(creates[i], CreateContract) else INSTANCE
                addr = derive_address(account, msg.nonce, i, kind)
                if addr in self.owners:
                    self.failures.append(f"{where}: derived address collision for {alias}")
                self.names[alias] = addr
                self.bound[alias] = addr
                self.owners[addr] = who
                self.clients[who].session.adopt(addr)
                self.sim.names[addr] = alias

        def make(actor: ClientActor) -> Submission:
            account = self._issuing_account(spec, stmts, who, where)
            if not actor.session.signs_for(account):
                # a deliberately unauthorised attempt: sign anyway and let validators judge
                actor.session.adopt(account)
            block = block_for(account)
            msg = actor.session.submit(account, block)
            after_sign(account, msg, block)
            return Submission(msg, verifiers, quorum, spec.get("tag"), bool(spec.get("withhold")))

        return make, block_for, after_sign

    def start(self, spec, where: str, on_done: Optional[Callable[[], None]] = None) -> None:
        done = on_done or (lambda: None)
        if "parallel" in spec:
            lanes = [lane if isinstance(lane, list) else [lane] for lane in spec["parallel"]]
            for j, lane in enumerate(lanes):
                self._run_lane(lane, f"{where}.{j}", 0)
            done()
            return
        rec = StepRecord(where, spec)
        self.records.append(rec)
        if "check" in spec:
            for chk in spec["check"]:
                msg = self.check(chk)
                if msg:
                    self.failures.append(f"{where}: {msg}")
            done()
            return
        actor = self.clients[spec["as"]]
        if "release" in spec:
            if not actor.release(spec["release"]):
                raise ScenarioError(f"{where}: nothing withheld under tag {spec['release']!r}")
            done()
            return
        if "replay" in spec:
            if not isinstance(actor, ByzantineClient):
                raise ScenarioError(f"{where}: only Byzantine clients replay")
            actor.replay()
            done()
            return
        if "respawn" in spec:
            actor.respawn()
            done()
            return
        if "equivocate" in spec:
            if not isinstance(actor, ByzantineClient):
                raise ScenarioError(f"{where}: only Byzantine clients equivocate")
            text_a, text_b = spec["equivocate"]
            _, block_a, _ = self._prepare(spec, where, text_a)
            _, block_b, _ = self._prepare(spec, where, text_b)
            account = actor.address
            honest = [a.address for a in self.sim.validators if a.address not in self.colluders]
            self.rng.shuffle(honest)
            split = honest[: (len(honest) + 1) // 2]
            vkeys = [self.keys[v] for v in spec.get("verifiers", ())]
            subs = actor.equivocate(account, block_a(account), block_b(account), split=split,
                                    verifier_keys=vkeys)
            rec.submissions.extend(subs)
            done()
            return
        make, _, _ = self._prepare(spec, where)

        def signed() -> Submission:
            sub = make(actor)
            rec.submissions.append(sub)
            return sub

        account_hint = self._peek_account(spec, where)
        actor.enqueue(account_hint, signed, on_done=lambda sub: done())

    def _peek_account(self, spec, where) -> Address:
        try:
            stmts = parse_statements(spec["do"])
        except ParseError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        return self._issuing_account(spec, stmts, spec["as"], where)

    def _run_lane(self, lane, where: str, i: int) -> None:
        if i >= len(lane):
            return
        spec = lane[i]

        def go() -> None:
            self.start(spec, f"{where}.{i}", on_done=lambda: self._run_lane(lane, where, i + 1))

        if "at" in spec and "parallel" not in spec:
            self.sim.call_later(max(0, int(spec["at"]) - self.sim.now), go)
        else:
            go()

    def run(self) -> ScenarioResult:
        for i, spec in enumerate(self.scenario.steps):
            if "at" in spec:
                self.sim.run(until=int(spec["at"]))
            else:
                self.sim.run()
            self.start(spec, f"step {i}")
        self.sim.run()
        self._check_expectations()
        for chk in self.scenario.checks:
            msg = self.check(chk)
            if msg:
                self.failures.append(msg)
        if self.sim.queue:
            self.failures.append("horizon reached before quiescence")
        return ScenarioResult(self.scenario.name, self.seed, self.failures, self)

    # ------------------------------------------------------------ expectations

    def submission_outcome(self, sub: Submission) -> str:
        kinds = self.settle_kinds.get(sub.digest, {})
        honest = [a.name for a in self.honest()]
        settled_on = [n for n in honest if n in kinds]
        if sub.certificate is None and not settled_on:
            return "rejected"
        if len(settled_on) < len(honest):
            return "stuck"
        if all(kinds[n] == SETTLED_INERT for n in honest):
            return "inert"
        if any(kinds[n] == SETTLED_INERT for n in honest):
            return "mixed"
        return "applied"

    def _check_expectations(self) -> None:
        for rec in self.records:
            want = rec.spec.get("expect", "settled")
            if want == "any" or not rec.submissions or "equivocate" in rec.spec:
                continue
            for sub in rec.submissions:
                got = self.submission_outcome(sub)
                ok = {
                    "settled": got in ("applied", "inert", "mixed"),
                    "applied": got == "applied",
                    "inert": got in ("inert", "mixed"),
                    "rejected": got == "rejected",
                    "stuck": got == "stuck",
                    "certified": sub.certificate is not None,
                }[want]
                if not ok:
                    detail = ""
                    if got == "rejected":
                        detail = " (" + ", ".join(sorted(set(sub.rejections.values()))) + ")"
                    self.failures.append(f"{rec.where}: expected {want}, got {got}{detail}: {rec.spec.get('do', '')}")

    # ------------------------------------------------------------ checks

    def check(self, chk) -> Optional[str]:
        """Evaluate one assertion; returns a failure message or ``None``."""
        if isinstance(chk, str):
            name, arg = chk, {}
        elif isinstance(chk, Mapping) and len(chk) == 1:
            name, arg = next(iter(chk.items()))
        else:
            raise ScenarioError(f"bad check {chk!r}")
        fn = CHECKS.get(name)
        if fn is None:
            raise ScenarioError(f"unknown check {name}")
        if isinstance(arg, Mapping) and True in arg:
            # YAML 1.1 reads a bare ``on:`` key as the boolean true
            arg = {("on" if k is True else k): v for k, v in arg.items()}
        return fn(self, arg)

    def _on(self, arg):
        names = arg.get("on") if isinstance(arg, Mapping) else None
        vs = self.honest()
        if names:
            vs = [a for a in self.sim.validators if a.name in names]
        return vs


def _check_all_digests_equal(r: Runner, arg) -> Optional[str]:
    ds = {a.name: a.validator.state_digest() for a in r.honest()}
    if len(set(ds.values())) != 1:
        return "state digests differ: " + ", ".join(f"{k}={v.hex()[:8]}" for k, v in ds.items())
    return None


def _check_accounts_converge(r: Runner, arg) -> Optional[str]:
    ds = r.sim.accounts_digests()
    if len(set(ds.values())) != 1:
        return "account states differ: " + ", ".join(f"{k}={v.hex()[:8]}" for k, v in ds.items())
    return None


def _check_divergence(r: Runner, arg) -> Optional[str]:
    if _check_accounts_converge(r, arg) is None:
        return "expected validators to diverge, but they agree"
    return None


def _check_balance(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg["account"], "balance check")
    want = r.value(arg["value"])
    got = {a.name: a.validator.state.balance(addr) for a in r._on(arg)}
    if any(v != want for v in got.values()):
        return f"balance of {arg['account']}: expected {want}, got {got}"
    return None


def _check_total_balance(r: Runner, arg) -> Optional[str]:
    want = int(arg["value"])
    got = {a.name: a.validator.state.total_balance() for a in r._on(arg)}
    if any(v != want for v in got.values()):
        return f"total native balance: expected {want}, got {got}"
    return None


def _check_field(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg["account"], "field check")
    want = r.value(arg["value"])
    key = r.value(arg["key"]) if "key" in arg else None
    got = {}
    for a in r._on(arg):
        try:
            v = a.validator.state.field(addr, arg["name"])
        except Exception as exc:
            got[a.name] = f"<{exc}>"
            continue
        if key is not None:
            v = v.get(key, 0) if hasattr(v, "get") else None
        got[a.name] = v
    if any(v != want for v in got.values()):
        return f"field {arg['account']}.{arg['name']}{'[' + str(arg['key']) + ']' if key is not None else ''}: expected {want!r}, got {got}"
    return None


def _check_field_converges(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg["account"], "field check")
    got = {a.name: a.validator.state.field(addr, arg["name"]) for a in r.honest()}
    if len({digest(v) for v in got.values()}) != 1:
        return f"field {arg['account']}.{arg['name']} differs across validators: {got}"
    return None


def _check_settled_count(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg["account"], "settled-count check")
    want = int(arg["value"])
    got = {a.name: a.validator.nonce(addr) for a in r._on(arg)}
    if any(v != want for v in got.values()):
        return f"settled count of {arg['account']}: expected {want}, got {got}"
    return None


def _check_stuck(r: Runner, arg) -> Optional[str]:
    if isinstance(arg, str):
        arg = {"account": arg}
    addr = r.address(arg["account"], "stuck check")
    stuck = sorted(a.name for a in r.honest() if a.validator.pending(addr) is not None)
    if "on" in arg:
        if stuck != sorted(arg["on"]):
            return f"{arg['account']} stuck on {stuck}, expected {sorted(arg['on'])}"
    elif not stuck:
        return f"{arg['account']} is not stuck anywhere"
    return None


def _check_not_stuck(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg if isinstance(arg, str) else arg["account"], "not-stuck check")
    stuck = [a.name for a in r.honest() if a.validator.pending(addr) is not None]
    if stuck:
        return f"{r.alias_of(addr)} stuck on {stuck}"
    return None


def at_most_one_certificate(certificates, validators) -> Optional[str]:
    """At most one certified and one settled digest per (account, nonce)."""
    seen: Dict[Tuple[Address, int], set] = {}
    for cert in certificates:
        m = cert.message
        seen.setdefault((m.account, m.nonce), set()).add(m.digest())
    for slot, ds in seen.items():
        if len(ds) > 1:
            return f"{len(ds)} certificates for nonce {slot[1]} of {slot[0].short()}"
    settled: Dict[Tuple[Address, int], set] = {}
    for a in validators:
        for slot, d in a.validator.settled_by_slot.items():
            settled.setdefault(slot, set()).add(d)
    for slot, ds in settled.items():
        if len(ds) > 1:
            return f"validators settled {len(ds)} messages for nonce {slot[1]} of {slot[0].short()}"
    return None


def _check_at_most_one_certificate(r: Runner, arg) -> Optional[str]:
    bad = [c for c in r.all_certificates() if not check_certificate(c, r.quorum)]
    if bad:
        return f"{len(bad)} certificates fail verification"
    return at_most_one_certificate(r.all_certificates(), r.honest())


def _check_presettled_empty(r: Runner, arg) -> Optional[str]:
    busy = {a.name: len(a.validator.presettled) for a in r.honest() if a.validator.presettled}
    if busy:
        return f"presettled not empty at quiescence: {busy}"
    return None


def _check_oracle_digest(r: Runner, arg) -> Optional[str]:
    from .oracle import oracle_digest

    want = oracle_digest(r.genesis, r.all_certificates(), seed=r.seed,
                         resolution=r.config.validator_options.enforce_monotonicity_resolution,
                         published=r.published())
    got = {a.name: a.validator.state_digest() for a in r.honest()}
    if any(v != want for v in got.values()):
        return f"oracle digest {want.hex()[:8]} differs from validators {[v.hex()[:8] for v in got.values()]}"
    return None


def _check_claim_settled(r: Runner, arg) -> Optional[str]:
    tag = r.value(arg["tag"])
    payload = tuple(r.value(p) for p in arg.get("payload", ()))
    d = data_digest(tag, payload)
    missing = [a.name for a in r._on(arg) if not a.validator.state.is_settled(d)]
    want = arg.get("settled", True)
    if want and missing:
        return f"claim {tag} not settled on {missing}"
    if not want and len(missing) != len(r._on(arg)):
        return f"claim {tag} unexpectedly settled"
    return None


def _check_certificates(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg["account"], "certificates check")
    n = len({c.message.digest() for c in r.all_certificates() if c.message.account == addr})
    if n != int(arg["value"]):
        return f"{n} certificates for {arg['account']}, expected {arg['value']}"
    return None


def _check_exists(r: Runner, arg) -> Optional[str]:
    addr = r.address(arg if isinstance(arg, str) else arg["account"], "exists check")
    want = True if isinstance(arg, str) else bool(arg.get("value", True))
    got = {a.name: a.validator.state.exists(addr) for a in r.honest()}
    if any(v != want for v in got.values()):
        return f"existence of {r.alias_of(addr)}: expected {want}, got {got}"
    return None


CHECKS: Dict[str, Callable[[Runner, Any], Optional[str]]] = {
    "all-digests-equal": _check_all_digests_equal,
    "accounts-converge": _check_accounts_converge,
    "divergence-expected": _check_divergence,
    "balance": _check_balance,
    "total-balance": _check_total_balance,
    "field": _check_field,
    "field-converges": _check_field_converges,
    "settled-count": _check_settled_count,
    "stuck": _check_stuck,
    "not-stuck": _check_not_stuck,
    "at-most-one-certificate": _check_at_most_one_certificate,
    "presettled-empty": _check_presettled_empty,
    "oracle-digest": _check_oracle_digest,
    "claim-settled": _check_claim_settled,
    "certificates": _check_certificates,
    "exists": _check_exists,
}


def run(scenario, seed: Optional[int] = None, sim_config: Optional[SimConfig] = None,
        **overrides) -> ScenarioResult:
    """Run a scenario (object or path) once and check its assertions."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    return Runner(scenario, seed, sim_config, **overrides).run()


def sweep(scenario, seeds: Sequence[int], **overrides) -> List[ScenarioResult]:
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    return [run(scenario, s, **overrides) for s in seeds]
