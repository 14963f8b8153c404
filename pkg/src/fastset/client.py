"""Client side of the protocol: Steps 1, 2 and 5.

Two layers live here.

* A synchronous library (``ClientSession``, ``gather_verifiers``,
  ``drive_settlement``) that talks to in-process verifier and validator
  objects directly.  The client can be its own proxy this way.
* Event-driven client handles (``ClientActor`` and its Byzantine variants)
  that the simulator drives through ``on_message`` and ``on_tick``.  They
  implement the same steps over a lossy network with retries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .claims import ClaimBlock, GlobalState
from .crypto import (
    Certificate,
    CryptoError,
    KeyPair,
    QuorumConfig,
    SignedMessage,
    VerifiedMessage,
    aggregate,
    check_approval,
    sign_message,
    verifier_sign,
)
from .values import Address

log = logging.getLogger(__name__)


class ClientError(Exception):
    pass


class NotOwner(ClientError):
    def __init__(self, account: Address) -> None:
        super().__init__(f"session does not sign for {account!r}")
        self.account = account


class VerifierQuorumUnreachable(ClientError):
    pass


class ValidatorQuorumUnreachable(ClientError):
    pass


@dataclass(frozen=True)
class RetryPolicy:
    interval_ms: int = 500
    max_attempts: int = 20


# ------------------------------------------------------------------ Step 1


class ClientSession:
    """A key plus the nonce streams of every account it signs for.

    Each owned contract or instance has its own nonce stream, signed with
    the owner's key.  Nonces start at 0.
    """

    def __init__(self, key: KeyPair, clock: Callable[[], int] = lambda: 0) -> None:
        self.key = key
        self.address = key.address
        self.owned_accounts: Set[Address] = set()
        self.nonces: Dict[Address, int] = {}
        self.clock = clock

    def signs_for(self, account: Address) -> bool:
        return account == self.address or account in self.owned_accounts

    def adopt(self, account: Address) -> None:
        self.owned_accounts.add(account)

    def next_nonce(self, account: Address) -> int:
        return self.nonces.get(account, 0)

    def submit(self, issuer: Address, block, timestamp: Optional[int] = None) -> SignedMessage:
        if not self.signs_for(issuer):
            raise NotOwner(issuer)
        if not isinstance(block, ClaimBlock):
            block = ClaimBlock(tuple(block))
        if block.issuer != issuer:
            raise ClientError("block issuer does not match the issuing account")
        nonce = self.next_nonce(issuer)
        self.nonces[issuer] = nonce + 1
        ts = self.clock() if timestamp is None else timestamp
        return sign_message(self.key, block, nonce, ts)

    def release_nonce(self, msg: SignedMessage) -> None:
        """Give back a nonce whose message no validator ever approved."""
        if self.nonces.get(msg.account) == msg.nonce + 1:
            self.nonces[msg.account] = msg.nonce


def submit(session: ClientSession, issuer: Address, block, timestamp: Optional[int] = None) -> SignedMessage:
    return session.submit(issuer, block, timestamp)


# ------------------------------------------------------------------ Step 2


class Verifier:
    """A verifier: signs the digest of any message its policy accepts."""

    def __init__(self, key: KeyPair, policy: Callable[[SignedMessage], bool] = lambda m: True,
                 responsive: bool = True) -> None:
        self.key = key
        self.address = key.address
        self.policy = policy
        self.responsive = responsive

    def sign_request(self, msg: SignedMessage) -> Optional[bytes]:
        if not self.responsive or not self.policy(msg):
            return None
        return verifier_sign(self.key, msg)


@dataclass
class ProxyPlan:
    verifiers: Mapping[Address, Verifier] = field(default_factory=dict)
    validators: Sequence = ()
    retry_policy: RetryPolicy = RetryPolicy()


def gather_verifiers(msg: SignedMessage, needed: Iterable[Address], quorum: int,
                     plan: ProxyPlan) -> VerifiedMessage:
    """Collect verifier signatures until ``quorum`` of ``needed`` is met.

    The issuer's own signature counts, so a message from a needed signer
    asks for one signature fewer.
    """
    needed = list(needed)
    have = 1 if msg.sender in needed else 0
    sigs: Dict[Address, bytes] = {}
    for _ in range(plan.retry_policy.max_attempts):
        if have + len(sigs) >= quorum:
            break
        for addr in needed:
            if addr == msg.sender or addr in sigs or have + len(sigs) >= quorum:
                continue
            handle = plan.verifiers.get(addr)
            sig = handle.sign_request(msg) if handle is not None else None
            if sig is not None:
                sigs[addr] = sig
    if have + len(sigs) < quorum:
        raise VerifierQuorumUnreachable(f"{have + len(sigs)} of {quorum} verifier signatures")
    return VerifiedMessage(msg, sigs)


# ------------------------------------------------------------------ Step 5


def drive_settlement(vmsg: VerifiedMessage, plan: ProxyPlan, config: QuorumConfig,
                     now: int = 0) -> Certificate:
    """Broadcast, collect approvals, aggregate at 2f+1, broadcast the certificate.

    Validators are called in process; each must offer ``handle_verified``,
    ``handle_certificate`` and ``drain``.  Returns the certificate.
    """
    msg = vmsg.message
    approvals: Dict[Address, bytes] = {}
    for _ in range(plan.retry_policy.max_attempts):
        for v in plan.validators:
            vid = v.id
            if vid in approvals:
                continue
            answer = v.handle_verified(vmsg, now)
            if answer and check_approval(vid, msg, answer.signature):
                approvals[vid] = answer.signature
        if len(approvals) >= config.quorum_size:
            break
    try:
        cert = aggregate(msg, approvals, config, vmsg.verifier_sigs)
    except CryptoError as exc:
        raise ValidatorQuorumUnreachable(str(exc)) from exc
    for v in plan.validators:
        v.handle_certificate(cert)
        v.drain()
    return cert


# ------------------------------------------------------- event-driven client


# wire message kinds
VERIFY_REQUEST = "verify_req"
VERIFIER_SIG = "verifier_sig"
SUBMIT = "submit"
APPROVAL = "approval"
REJECTION = "rejection"
CERTIFICATE = "cert"

# submission statuses
VERIFYING = "verifying"
APPROVING = "approving"
CERTIFIED = "certified"
FAILED = "failed"


@dataclass
class Submission:
    """One message on its way through Steps 2 to 5."""

    message: SignedMessage
    verifiers: Tuple[Address, ...] = ()
    verifier_quorum: int = 0
    tag: Optional[str] = None
    withhold: bool = False  # keep the certificate instead of broadcasting it
    targets: Optional[Tuple[Address, ...]] = None  # validators to ask (default all)
    status: str = VERIFYING
    verifier_sigs: Dict[Address, bytes] = field(default_factory=dict)
    approvals: Dict[Address, bytes] = field(default_factory=dict)
    rejections: Dict[Address, str] = field(default_factory=dict)
    attempts: int = 0
    certificate: Optional[Certificate] = None
    done_callbacks: List[Callable[["Submission"], None]] = field(default_factory=list)

    @property
    def digest(self) -> bytes:
        return self.message.digest()

    def verified(self) -> VerifiedMessage:
        return VerifiedMessage(self.message, self.verifier_sigs)

    def verifier_quorum_met(self) -> bool:
        own = 1 if self.message.sender in self.verifiers else 0
        return own + len(self.verifier_sigs) >= self.verifier_quorum


class ClientActor:
    """Honest client plus its own proxy, driven by the simulator.

    ``net`` must provide ``now``, ``send(src, dst, kind, payload)`` and
    ``set_timer(owner, delay_ms)``; the simulator calls ``on_message`` and
    ``on_tick`` back.  Messages of one account are sent one at a time.
    """

    def __init__(self, name: str, key: KeyPair, config: QuorumConfig, net,
                 retry: RetryPolicy = RetryPolicy()) -> None:
        self.name = name
        self.key = key
        self.address = key.address
        self.config = config
        self.net = net
        self.retry = retry
        self.session = ClientSession(key, clock=lambda: net.now)
        self.queues: Dict[Address, List[Tuple[Callable[[], Submission], Callable]]] = {}
        self.inflight: Dict[Address, Submission] = {}
        self.by_digest: Dict[bytes, Submission] = {}
        self.history: List[Submission] = []
        self.certificates: List[Certificate] = []
        # digest -> virtual time the certificate was first sent to validators
        self.published: Dict[bytes, int] = {}
        self.timer_armed = False
        # every participant can act as a verifier; the policy decides what it signs
        self.verifier_policy: Callable[[SignedMessage], bool] = lambda m: True

    # ---------------------------------------------------------- requests

    def enqueue(self, account: Address, make: Callable[[], Submission],
                on_done: Optional[Callable[[Submission], None]] = None) -> None:
        """Queue a message; ``make`` signs it when the account's turn comes."""
        self.queues.setdefault(account, []).append((make, on_done))
        if account not in self.inflight:
            self._start_next(account)

    def prepare(self, account: Address, block, verifiers=(), quorum: int = 0,
                tag: Optional[str] = None, withhold: bool = False) -> Callable[[], Submission]:
        def make() -> Submission:
            msg = self.session.submit(account, block)
            return Submission(msg, tuple(verifiers), quorum, tag, withhold)
        return make

    def _start_next(self, account: Address) -> None:
        queue = self.queues.get(account)
        if not queue:
            self.inflight.pop(account, None)
            return
        make, on_done = queue.pop(0)
        sub = make()
        if on_done is not None:
            sub.done_callbacks.append(on_done)
        self.inflight[account] = sub
        self._launch(sub)

    def _launch(self, sub: Submission) -> None:
        self.by_digest[sub.digest] = sub
        self.history.append(sub)
        if sub.verifier_quorum_met():
            self._broadcast_submit(sub)
        else:
            sub.status = VERIFYING
            for v in sub.verifiers:
                if v != sub.message.sender:
                    self.net.send(self.address, v, VERIFY_REQUEST, sub.message)
        self._arm()

    def _broadcast_submit(self, sub: Submission) -> None:
        sub.status = APPROVING
        vmsg = sub.verified()
        for v in sub.targets or self.config.validators:
            if v not in sub.approvals:
                self.net.send(self.address, v, SUBMIT, vmsg)

    def _arm(self) -> None:
        if not self.timer_armed:
            self.timer_armed = True
            self.net.set_timer(self, self.retry.interval_ms)

    # ---------------------------------------------------------- handlers

    def on_message(self, src: Address, kind: str, payload) -> None:
        if kind == VERIFY_REQUEST:
            if self.verifier_policy(payload):
                sig = verifier_sign(self.key, payload)
                self.net.send(self.address, src, VERIFIER_SIG, (payload.digest(), sig))
        elif kind == VERIFIER_SIG:
            d, sig = payload
            sub = self.by_digest.get(d)
            if sub is None or sub.status != VERIFYING:
                return
            sub.verifier_sigs[src] = sig
            if sub.verifier_quorum_met():
                self._broadcast_submit(sub)
        elif kind == APPROVAL:
            sub = self.by_digest.get(payload.digest)
            if sub is None or sub.status != APPROVING:
                return
            if src in self.config.validators and check_approval(src, sub.message, payload.signature):
                sub.approvals[src] = payload.signature
                sub.rejections.pop(src, None)
                self._maybe_certify(sub)
        elif kind == REJECTION:
            sub = self.by_digest.get(payload.digest)
            if sub is not None and sub.status == APPROVING:
                sub.rejections[src] = payload.reason

    def _maybe_certify(self, sub: Submission) -> None:
        if len(sub.approvals) < self.config.quorum_size or sub.status == CERTIFIED:
            return
        cert = aggregate(sub.message, sub.approvals, self.config, tuple(sub.verifier_sigs.items()))
        sub.certificate = cert
        sub.status = CERTIFIED
        self.certificates.append(cert)
        if not sub.withhold:
            self.broadcast_certificate(cert)
        self._finish(sub)

    def broadcast_certificate(self, cert: Certificate) -> None:
        self.published.setdefault(cert.message.digest(), self.net.now)
        for v in self.config.validators:
            self.net.send(self.address, v, CERTIFICATE, cert, reliable=True)

    def release(self, tag: str) -> bool:
        """Broadcast a withheld certificate."""
        for sub in self.history:
            if sub.tag == tag and sub.certificate is not None:
                self.broadcast_certificate(sub.certificate)
                return True
        return False

    def _finish(self, sub: Submission) -> None:
        account = sub.message.account
        if self.inflight.get(account) is sub:
            self.inflight.pop(account)
            for cb in sub.done_callbacks:
                cb(sub)
            # a callback may already have enqueued and launched the next message
            if account not in self.inflight:
                self._start_next(account)
        else:
            for cb in sub.done_callbacks:
                cb(sub)

    def on_tick(self) -> None:
        self.timer_armed = False
        active = False
        for sub in list(self.inflight.values()):
            if sub.status in (CERTIFIED, FAILED):
                continue
            sub.attempts += 1
            if sub.attempts >= self.retry.max_attempts:
                sub.status = FAILED
                if not sub.approvals:
                    self.session.release_nonce(sub.message)
                log.debug("%s gives up on nonce %d", self.name, sub.message.nonce)
                self._finish(sub)
                continue
            active = True
            if sub.status == VERIFYING:
                for v in sub.verifiers:
                    if v != sub.message.sender and v not in sub.verifier_sigs:
                        self.net.send(self.address, v, VERIFY_REQUEST, sub.message)
            else:
                self._broadcast_submit(sub)
        if active or any(s.status in (VERIFYING, APPROVING) for s in self.inflight.values()):
            self._arm()

    def respawn(self) -> None:
        """Forget all proxy state and redo the work for in-flight messages.

        Models replacing the proxy mid-run; the signed messages are kept, so
        nothing new is signed.
        """
        for account, sub in list(self.inflight.items()):
            fresh = Submission(sub.message, sub.verifiers, sub.verifier_quorum, sub.tag,
                               sub.withhold, sub.targets, done_callbacks=sub.done_callbacks)
            self.inflight[account] = fresh
            self._launch(fresh)


# ------------------------------------------------------ Byzantine clients

EQUIVOCATE_SAME_NONCE = "EquivocateSameNonce"
WITHHOLD_CERTIFICATE = "WithholdCertificate"
REPLAY_OLD_MESSAGE = "ReplayOldMessage"


class ByzantineClient(ClientActor):
    """Scripted faulty client.

    * ``EquivocateSameNonce``: signs two different blocks with one nonce
      and sends each to a different half of the validators (colluding
      validators get both), aggregating whatever certificates form.
    * ``WithholdCertificate``: forms certificates but sends them only after
      ``delay_ms`` (``None`` means never).
    * ``ReplayOldMessage``: re-sends its past messages and certificates.
    """

    def __init__(self, name: str, key: KeyPair, config: QuorumConfig, net, strategy: str,
                 delay_ms: Optional[int] = None, colluders: Iterable[Address] = (),
                 retry: RetryPolicy = RetryPolicy()) -> None:
        super().__init__(name, key, config, net, retry)
        self.strategy = strategy
        self.delay_ms = delay_ms
        self.colluders = tuple(colluders)

    def equivocate(self, account: Address, block_a, block_b, split: Optional[Sequence[Address]] = None,
                   on_done: Optional[Callable[[Submission], None]] = None,
                   verifier_keys: Sequence[KeyPair] = ()) -> Tuple[Submission, Submission]:
        """Sign both blocks at one nonce and send each to its own half.

        ``verifier_keys`` are verifiers willing to sign anything; their
        signatures are attached to both messages up front.
        """
        nonce = self.session.next_nonce(account)
        self.session.nonces[account] = nonce + 1
        now = self.net.now
        ma = sign_message(self.key, _as_block(block_a), nonce, now)
        mb = sign_message(self.key, _as_block(block_b), nonce, now)
        honest = [v for v in self.config.validators if v not in self.colluders]
        if split is None:
            split = honest[: (len(honest) + 1) // 2]
        half_a = tuple(split) + self.colluders
        half_b = tuple(v for v in honest if v not in split) + self.colluders
        subs = []
        for msg, targets in ((ma, half_a), (mb, half_b)):
            sub = Submission(msg, tuple(k.address for k in verifier_keys), len(verifier_keys),
                             targets=targets, tag="equivocation")
            for k in verifier_keys:
                sub.verifier_sigs[k.address] = verifier_sign(k, msg)
            if on_done is not None:
                sub.done_callbacks.append(on_done)
            self.by_digest[sub.digest] = sub
            self.history.append(sub)
            self._broadcast_submit(sub)
            subs.append(sub)
        self._arm()
        return subs[0], subs[1]

    def _maybe_certify(self, sub: Submission) -> None:
        if self.strategy == WITHHOLD_CERTIFICATE:
            sub.withhold = True
            if len(sub.approvals) >= self.config.quorum_size and sub.status != CERTIFIED \
                    and self.delay_ms is not None:
                cert = aggregate(sub.message, sub.approvals, self.config, tuple(sub.verifier_sigs.items()))
                self.net.call_later(self.delay_ms, lambda: self.broadcast_certificate(cert))
        super()._maybe_certify(sub)

    def on_tick(self) -> None:
        if self.strategy == EQUIVOCATE_SAME_NONCE:
            self.timer_armed = False
            active = False
            for sub in self.history:
                if sub.tag == "equivocation" and sub.status == APPROVING:
                    sub.attempts += 1
                    if sub.attempts >= self.retry.max_attempts:
                        sub.status = FAILED
                        for cb in sub.done_callbacks:
                            cb(sub)
                        continue
                    active = True
                    self._broadcast_submit(sub)
            if active:
                self._arm()
            return
        super().on_tick()

    def replay(self) -> int:
        """Re-send every past message and certificate; returns how many."""
        count = 0
        for sub in self.history:
            for v in self.config.validators:
                self.net.send(self.address, v, SUBMIT, sub.verified())
                count += 1
            if sub.certificate is not None:
                self.broadcast_certificate(sub.certificate)
                count += 1
        return count


def _as_block(block) -> ClaimBlock:
    return block if isinstance(block, ClaimBlock) else ClaimBlock(tuple(block))


def byzantine_client(strategy: str, name: str, key: KeyPair, config: QuorumConfig, net,
                     **kw) -> ByzantineClient:
    if strategy not in (EQUIVOCATE_SAME_NONCE, WITHHOLD_CERTIFICATE, REPLAY_OLD_MESSAGE):
        raise ValueError(f"unknown strategy {strategy}")
    return ByzantineClient(name, key, config, net, strategy, **kw)


class VerifierActor:
    """Event-driven wrapper around ``Verifier``."""

    def __init__(self, name: str, verifier: Verifier, net) -> None:
        self.name = name
        self.verifier = verifier
        self.address = verifier.address
        self.net = net

    def on_message(self, src: Address, kind: str, payload) -> None:
        if kind != VERIFY_REQUEST:
            return
        sig = self.verifier.sign_request(payload)
        if sig is not None:
            self.net.send(self.address, src, VERIFIER_SIG, (payload.digest(), sig))

    def on_tick(self) -> None:
        pass
