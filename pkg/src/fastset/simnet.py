"""Deterministic discrete-event network simulator.

Everything that is random (latency, drops, duplicates) draws from a
per-entity generator forked from one root seed, so a run is a function of
``SimConfig.seed`` alone.  Time is integer milliseconds.

Messages may be dropped or duplicated.  Certificates are sent "reliably":
a dropped certificate is redelivered after ``redelivery_ms``, which models
the eventual-delivery assumption of Step 6.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .client import APPROVAL, CERTIFICATE, REJECTION, SUBMIT, VERIFIER_SIG, VERIFY_REQUEST
from .crypto import Certificate, KeyPair, QuorumConfig, SignedMessage, VerifiedMessage, approve
from .encoding import digest
from .validator import (
    SETTLED,
    SETTLED_INERT,
    Approval,
    Validator,
    ValidatorOptions,
)
from .values import Address

log = logging.getLogger(__name__)

# Byzantine validator behaviours
HONEST = "Honest"
SILENT = "Silent"
SIGN_EVERYTHING = "SignEverything"
EQUIVOCATION_HELPER = "EquivocationHelper"
BYZANTINE_MODES = (SILENT, SIGN_EVERYTHING, EQUIVOCATION_HELPER)


@dataclass(frozen=True)
class Latency:
    """``fixed`` uses ``a``; ``uniform`` draws from [a, b]; ``lognormal``
    has median ``a`` and shape ``b``."""

    kind: str = "uniform"
    a: float = 30
    b: float = 50

    def sample(self, rng: random.Random) -> int:
        if self.kind == "fixed":
            return int(self.a)
        if self.kind == "uniform":
            return rng.randint(int(self.a), int(self.b))
        if self.kind == "lognormal":
            import math

            return max(1, int(round(rng.lognormvariate(math.log(self.a), self.b))))
        raise ValueError(f"unknown latency model {self.kind}")

    @classmethod
    def parse(cls, spec) -> "Latency":
        if spec is None:
            return cls()
        if isinstance(spec, Latency):
            return spec
        if isinstance(spec, (int, float)):
            return cls("fixed", spec, spec)
        if isinstance(spec, str):
            return {"wan": cls(), "lan": cls("uniform", 1, 5)}[spec.lower()]
        if isinstance(spec, dict):
            kind = spec.get("kind", "uniform")
            if kind == "fixed":
                return cls("fixed", spec["ms"], spec["ms"])
            if kind == "uniform":
                return cls("uniform", spec["lo"], spec["hi"])
            if kind == "lognormal":
                return cls("lognormal", spec["median"], spec.get("sigma", 0.5))
        raise ValueError(f"bad latency spec {spec!r}")


@dataclass(frozen=True)
class LinkOverride:
    """Extra delay on matching sends; ``None`` fields match anything."""

    src: Optional[str] = None
    dst: Optional[str] = None
    kind: Optional[str] = None
    extra_ms: int = 0


@dataclass
class SimConfig:
    seed: int = 0
    latency: Latency = field(default_factory=Latency)
    drop_rate: float = 0.0
    duplication_rate: float = 0.0
    byzantine_validators: Dict[int, str] = field(default_factory=dict)  # index -> mode
    horizon_ms: int = 3_600_000
    redelivery_ms: int = 1_000
    links: Tuple[LinkOverride, ...] = ()
    validator_options: ValidatorOptions = field(default_factory=ValidatorOptions)


def fork_rng(seed: int, *label) -> random.Random:
    """Independent generator for one entity, derived from the root seed."""
    h = hashlib.sha256(repr((seed,) + label).encode()).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


class TraceLog:
    """Append-only list of trace records, serialised as NDJSON."""

    def __init__(self) -> None:
        self.records: List[Dict[str, Any]] = []

    def add(self, t: int, event: str, **fields) -> None:
        rec = {"t": t, "event": event}
        rec.update(fields)
        self.records.append(rec)

    def of(self, event: str) -> List[Dict[str, Any]]:
        return [r for r in self.records if r["event"] == event]

    def to_ndjson(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_ndjson())

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class Metrics:
    messages_sent: int = 0
    messages_dropped: int = 0
    messages_duplicated: int = 0
    certificates_formed: int = 0
    settle_latencies_ms: List[int] = field(default_factory=list)
    max_presettled: int = 0

    def summary(self) -> Dict[str, Any]:
        lat = sorted(self.settle_latencies_ms)
        return {
            "messages_sent": self.messages_sent,
            "messages_dropped": self.messages_dropped,
            "certificates_formed": self.certificates_formed,
            "settle_latency_p50_ms": lat[len(lat) // 2] if lat else None,
            "settle_latency_max_ms": lat[-1] if lat else None,
            "max_presettled": self.max_presettled,
        }


def _short(d: bytes) -> str:
    return d.hex()[:12]


def payload_digest(payload) -> str:
    """Short digest of the protocol message a wire payload refers to."""
    if isinstance(payload, SignedMessage):
        return _short(payload.digest())
    if isinstance(payload, (VerifiedMessage, Certificate)):
        return _short(payload.message.digest())
    if isinstance(payload, tuple) and payload and isinstance(payload[0], bytes):
        return _short(payload[0])
    d = getattr(payload, "digest", None)
    return _short(d) if isinstance(d, bytes) else ""


class ValidatorActor:
    """Network face of a validator replica, honest or Byzantine."""

    def __init__(self, name: str, validator: Validator, net: "Simulation", mode: str = HONEST,
                 helped: Iterable[Address] = ()) -> None:
        self.name = name
        self.validator = validator
        self.address = validator.id
        self.net = net
        self.mode = mode
        self.helped = set(helped)

    @property
    def honest(self) -> bool:
        return self.mode == HONEST

    def _signs_blindly(self, msg: SignedMessage) -> bool:
        if self.mode == SIGN_EVERYTHING:
            return True
        return self.mode == EQUIVOCATION_HELPER and msg.sender in self.helped

    def on_message(self, src: Address, kind: str, payload) -> None:
        if self.mode == SILENT:
            return
        v = self.validator
        if kind == SUBMIT:
            msg = payload.message
            if self._signs_blindly(msg) and msg.signature_ok():
                answer = Approval(v.id, msg.digest(), approve(v.key, msg))
            else:
                answer = v.handle_verified(payload, self.net.now)
            if answer:
                self.net.trace.add(self.net.now, "approve", validator=self.name,
                                   digest=_short(answer.digest))
                self.net.send(self.address, src, APPROVAL, answer)
            else:
                self.net.trace.add(self.net.now, "reject", validator=self.name,
                                   digest=_short(answer.digest), reason=answer.reason,
                                   detail=answer.detail)
                self.net.send(self.address, src, REJECTION, answer)
        elif kind == CERTIFICATE:
            self.net.sent_at.setdefault(payload.message.digest(), payload.message.timestamp)
            ev = v.handle_certificate(payload)
            if ev.kind != "Queued":
                return
            self.net.metrics.max_presettled = max(self.net.metrics.max_presettled, len(v.presettled))
            for e in v.drain():
                self.net.on_settled(self, e)

    def on_tick(self) -> None:
        pass


class Simulation:
    """Event queue, network and the actors attached to it."""

    def __init__(self, config: SimConfig, quorum: QuorumConfig) -> None:
        self.config = config
        self.quorum = quorum
        self.now = 0
        self.queue: List[Tuple[int, int, Callable[[], None]]] = []
        self.seq = 0
        self.actors: Dict[Address, Any] = {}
        self.names: Dict[Address, str] = {}
        self.rngs: Dict[Address, random.Random] = {}
        self.trace = TraceLog()
        self.metrics = Metrics()
        self.validators: List[ValidatorActor] = []
        self.sent_at: Dict[bytes, int] = {}
        self.settle_hooks: List[Callable[[ValidatorActor, Any], None]] = []

    # ---------------------------------------------------------- wiring

    def attach(self, name: str, actor) -> None:
        self.actors[actor.address] = actor
        self.names[actor.address] = name
        self.rngs[actor.address] = fork_rng(self.config.seed, "entity", name)

    def add_validators(self, keys: Sequence[KeyPair], genesis_state,
                       helped: Iterable[Address] = ()) -> List[ValidatorActor]:
        helped = tuple(helped)
        for i, key in enumerate(keys):
            mode = self.config.byzantine_validators.get(i, HONEST)
            v = Validator(key, self.quorum, genesis_state, self.config.validator_options)
            actor = ValidatorActor(f"v{i}", v, self, mode, helped)
            self.attach(actor.name, actor)
            self.validators.append(actor)
        return self.validators

    def honest_validators(self) -> List[ValidatorActor]:
        return [a for a in self.validators if a.honest]

    # ---------------------------------------------------------- events

    def _push(self, at: int, fn: Callable[[], None]) -> None:
        self.seq += 1
        heapq.heappush(self.queue, (at, self.seq, fn))

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> None:
        self._push(self.now + max(0, int(delay_ms)), fn)

    def set_timer(self, actor, delay_ms: int) -> None:
        self.call_later(delay_ms, actor.on_tick)

    def _extra_delay(self, src: Address, dst: Address, kind: str) -> int:
        extra = 0
        sname, dname = self.names.get(src), self.names.get(dst)
        for o in self.config.links:
            if ((o.src is None or o.src == sname) and (o.dst is None or o.dst == dname)
                    and (o.kind is None or o.kind == kind)):
                extra += o.extra_ms
        return extra

    def send(self, src: Address, dst: Address, kind: str, payload, reliable: bool = False) -> None:
        rng = self.rngs.get(src) or self.rngs.setdefault(src, fork_rng(self.config.seed, "anon", src))
        self.metrics.messages_sent += 1
        pd = payload_digest(payload)
        self.trace.add(self.now, "send", src=self._name(src), dst=self._name(dst), kind=kind, digest=pd)
        if self.config.drop_rate and rng.random() < self.config.drop_rate:
            self.metrics.messages_dropped += 1
            self.trace.add(self.now, "drop", src=self._name(src), dst=self._name(dst), kind=kind,
                           digest=pd, redeliver=reliable)
            if reliable:
                self.call_later(self.config.redelivery_ms,
                                lambda: self.send(src, dst, kind, payload, reliable=True))
            return
        copies = 1
        if self.config.duplication_rate and rng.random() < self.config.duplication_rate:
            copies = 2
            self.metrics.messages_duplicated += 1
        for _ in range(copies):
            delay = self.config.latency.sample(rng) + self._extra_delay(src, dst, kind)
            self.call_later(delay, lambda: self._deliver(src, dst, kind, payload))

    def _name(self, addr: Address) -> str:
        return self.names.get(addr) or addr.short()

    def _deliver(self, src: Address, dst: Address, kind: str, payload) -> None:
        self.trace.add(self.now, "deliver", src=self._name(src), dst=self._name(dst), kind=kind,
                       digest=payload_digest(payload))
        actor = self.actors.get(dst)
        if actor is not None:
            actor.on_message(src, kind, payload)

    def on_settled(self, actor: ValidatorActor, event) -> None:
        self.trace.add(self.now, "settle", validator=actor.name, digest=_short(event.digest),
                       account=self._name(event.account),
                       nonce=event.nonce, inert=event.kind == SETTLED_INERT)
        sent_at = self.sent_at.get(event.digest)
        if actor.honest and sent_at is not None:
            self.metrics.settle_latencies_ms.append(self.now - sent_at)
        for hook in self.settle_hooks:
            hook(actor, event)

    # ---------------------------------------------------------- running

    def pending_events(self) -> int:
        return len(self.queue)

    def step(self) -> bool:
        if not self.queue:
            return False
        at, _, fn = heapq.heappop(self.queue)
        if at > self.config.horizon_ms:
            self.queue.clear()
            return False
        self.now = max(self.now, at)
        fn()
        return True

    def run(self, until: Optional[int] = None) -> None:
        """Process events until the queue empties or time passes ``until``."""
        while self.queue:
            if until is not None and self.queue[0][0] > until:
                self.now = max(self.now, until)
                return
            if not self.step():
                return
        if until is not None:
            self.now = max(self.now, until)

    # ---------------------------------------------------------- results

    def final_state_digests(self, honest_only: bool = True) -> Dict[str, bytes]:
        return {a.name: a.validator.state_digest() for a in self.validators
                if a.honest or not honest_only}

    def accounts_digests(self, honest_only: bool = True) -> Dict[str, bytes]:
        return {a.name: digest(a.validator.state.accounts) for a in self.validators
                if a.honest or not honest_only}


def final_state_digests(sim: Simulation) -> Dict[str, bytes]:
    return sim.final_state_digests()


def run_scenario(config: SimConfig, quorum: Optional[QuorumConfig], scenario) -> "Any":
    """Run a scenario (a parsed document or a path) under ``config``."""
    from .scenario import load_scenario, run

    if not hasattr(scenario, "steps"):
        scenario = load_scenario(scenario)
    return run(scenario, seed=config.seed, sim_config=config)
