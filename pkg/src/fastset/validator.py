"""Validator replica: Steps 3, 4, 6 and 7 of the settlement protocol.

A ``Validator`` is a single-threaded state machine.  Its transitions are
methods that mutate the replica in place and return what the outside world
observes (an approval, a rejection, settlement events).  The replicated
``GlobalState`` itself is immutable, so ``snapshot()`` is cheap and the
world state is never observed half-applied.

Settlement (Step 7) loops to a fixpoint.  When several presettled messages
can settle at once they are taken in ``(account, nonce, digest)`` order so
traces are reproducible.  Verify claims are not re-checked at settlement;
only the validator quorum matters from Step 6 on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .claims import EvalContext, GlobalState, Invalid, apply_block, genesis
from .crypto import (
    Certificate,
    KeyPair,
    QuorumConfig,
    SignedMessage,
    VerifiedMessage,
    approve,
    check_certificate,
)
from .encoding import Digest
from .values import Address

log = logging.getLogger(__name__)

# rejection reasons (Step 3)
BAD_SIGNATURE = "BadSignature"
NOT_OWNER = "NotOwner"
STALE_OR_FUTURE = "StaleOrFutureTimestamp"
WRONG_NONCE = "WrongNonce"
CONFLICTING_PENDING = "ConflictingPending"
BAD_VERIFIER_SIGNATURE = "BadVerifierSignature"
INVALID_BLOCK = "InvalidBlock"

# settlement event kinds
SETTLED = "Settled"
SETTLED_INERT = "SettledInert"
QUEUED = "Queued"
REJECTED = "Rejected"


@dataclass(frozen=True)
class ValidatorOptions:
    enforce_monotonicity_resolution: bool = True
    # how far a message timestamp may run ahead of the validator clock
    timestamp_tolerance_ms: int = 300
    # how old a message may be when it first reaches this validator; resends
    # carry the original timestamp, so this covers the client retry window
    max_message_age_ms: int = 10_300
    check_timestamps: bool = True


@dataclass(frozen=True)
class Approval:
    validator: Address
    digest: Digest
    signature: bytes

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Rejection:
    validator: Address
    digest: Digest
    reason: str
    detail: str = ""
    expected_nonce: Optional[int] = None
    index: Optional[int] = None

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class SettlementEvent:
    validator: Address
    digest: Digest
    account: Address
    nonce: int
    kind: str
    reason: str = ""


@dataclass
class AccountSlot:
    nonce: int = 0
    pending: Optional[SignedMessage] = None


def message_context(msg: SignedMessage, verifiers: frozenset = frozenset(),
                    check_verify: bool = True) -> EvalContext:
    """Evaluation context of a message: its τ, T, sender, account and nonce."""
    return EvalContext(timestamp=msg.timestamp, verifiers=verifiers, sender=msg.sender,
                       account=msg.account, nonce=msg.nonce, check_verify=check_verify)


def settle_context(msg: SignedMessage) -> EvalContext:
    """Context used in Step 7, where Verify claims are not re-checked."""
    return message_context(msg, check_verify=False)


class Validator:
    def __init__(self, key: KeyPair, config: QuorumConfig, state: Optional[GlobalState] = None,
                 options: ValidatorOptions = ValidatorOptions()) -> None:
        self.key = key
        self.id = key.address
        self.config = config
        self.options = options
        self.state = state if state is not None else genesis()
        self.settled: set = set()
        self.presettled: Dict[Digest, Certificate] = {}
        self.accounts: Dict[Address, AccountSlot] = {}
        self.settled_by_slot: Dict[Tuple[Address, int], Digest] = {}
        self.max_presettled = 0

    # ----------------------------------------------------------- helpers

    def slot(self, account: Address) -> AccountSlot:
        s = self.accounts.get(account)
        if s is None:
            s = self.accounts[account] = AccountSlot()
        return s

    def nonce(self, account: Address) -> int:
        s = self.accounts.get(account)
        return s.nonce if s else 0

    def pending(self, account: Address) -> Optional[SignedMessage]:
        s = self.accounts.get(account)
        return s.pending if s else None

    def _reject(self, msg: SignedMessage, reason: str, detail: str = "", **kw) -> Rejection:
        return Rejection(self.id, msg.digest(), reason, detail, **kw)

    # ------------------------------------------------------ Steps 3 and 4

    def handle_verified(self, vmsg: VerifiedMessage, now: int) -> Union[Approval, Rejection]:
        """Validate ``<m>_#T`` and approve it, or say why not.

        The replicated state is not touched; only the pending slot is set.
        """
        msg = vmsg.message
        d = msg.digest()
        if not msg.signature_ok():
            return self._reject(msg, BAD_SIGNATURE)
        account = msg.account
        if self.state.root_owner(account) != msg.sender:
            return self._reject(msg, NOT_OWNER, "sender does not own the issuing account")
        slot = self.slot(account)
        if slot.pending is not None and slot.pending.digest() == d and slot.nonce == msg.nonce:
            # a resend of what we already approved: approve again
            return Approval(self.id, d, approve(self.key, msg))
        if self.options.check_timestamps:
            ahead = msg.timestamp - now
            if ahead > self.options.timestamp_tolerance_ms or -ahead > self.options.max_message_age_ms:
                return self._reject(msg, STALE_OR_FUTURE, f"timestamp {msg.timestamp} at {now}")
        if slot.nonce != msg.nonce:
            return self._reject(msg, WRONG_NONCE, expected_nonce=slot.nonce)
        if slot.pending is not None:
            return self._reject(msg, CONFLICTING_PENDING)
        if not vmsg.all_verifier_sigs_valid():
            return self._reject(msg, BAD_VERIFIER_SIGNATURE)
        result = apply_block(msg.block, self.state, message_context(msg, vmsg.verifiers()))
        if isinstance(result, Invalid):
            return self._reject(msg, INVALID_BLOCK, result.reason, index=result.index)
        slot.pending = msg
        return Approval(self.id, d, approve(self.key, msg))

    # ------------------------------------------------------------ Step 6

    def handle_certificate(self, cert: Certificate) -> SettlementEvent:
        msg = cert.message
        d = msg.digest()
        if not check_certificate(cert, self.config):
            log.debug("validator %s ignores a bad certificate", self.id.short())
            return SettlementEvent(self.id, d, msg.account, msg.nonce, REJECTED, "bad certificate")
        if d in self.settled or d in self.presettled:
            return SettlementEvent(self.id, d, msg.account, msg.nonce, REJECTED, "duplicate")
        self.presettled[d] = cert
        self.max_presettled = max(self.max_presettled, len(self.presettled))
        return SettlementEvent(self.id, d, msg.account, msg.nonce, QUEUED)

    # ------------------------------------------------------------ Step 7

    def _settle(self, d: Digest, msg: SignedMessage, new_state: Optional[GlobalState]) -> SettlementEvent:
        slot = self.slot(msg.account)
        if new_state is not None:
            self.state = new_state
        slot.nonce += 1
        slot.pending = None
        del self.presettled[d]
        self.settled.add(d)
        self.settled_by_slot[(msg.account, msg.nonce)] = d
        kind = SETTLED if new_state is not None else SETTLED_INERT
        return SettlementEvent(self.id, d, msg.account, msg.nonce, kind)

    def drain(self) -> List[SettlementEvent]:
        """Settle every presettled message that can be settled, to a fixpoint."""
        events: List[SettlementEvent] = []
        progress = True
        while progress and self.presettled:
            progress = False
            ready = []
            for d, cert in self.presettled.items():
                m = cert.message
                if self.nonce(m.account) == m.nonce:
                    ready.append((m.account, m.nonce, d))
            for account, nonce, d in sorted(ready):
                if d not in self.presettled or self.nonce(account) != nonce:
                    continue
                msg = self.presettled[d].message
                result = apply_block(msg.block, self.state, settle_context(msg))
                if not isinstance(result, Invalid):
                    events.append(self._settle(d, msg, result))
                    progress = True
                elif (self.options.enforce_monotonicity_resolution
                      and self.pending(account) is not None
                      and self.pending(account).digest() == d):
                    events.append(self._settle(d, msg, None))
                    progress = True
        return events

    # -------------------------------------------------------- inspection

    def snapshot(self) -> GlobalState:
        return self.state

    def state_digest(self) -> Digest:
        return self.state.digest()

    def stuck_accounts(self) -> List[Address]:
        """Accounts with an approved message that has not settled here."""
        return sorted(a for a, s in self.accounts.items() if s.pending is not None)


# functional forms matching the protocol description


def handle_verified(v: Validator, msg: VerifiedMessage, now: int):
    return v, v.handle_verified(msg, now)


def handle_certificate(v: Validator, cert: Certificate) -> Validator:
    v.handle_certificate(cert)
    return v


def drain_presettled(v: Validator):
    return v, v.drain()
