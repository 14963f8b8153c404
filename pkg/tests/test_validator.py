"""Validator steps: approval checks, presettlement and draining."""

import pytest

from fastset.claims import ClaimBlock, genesis, guard, transfer
from fastset.client import (
    ClientSession,
    NotOwner,
    ProxyPlan,
    ValidatorQuorumUnreachable,
    Verifier,
    VerifierQuorumUnreachable,
    drive_settlement,
    gather_verifiers,
)
from fastset.crypto import (
    Certificate,
    KeyPair,
    QuorumConfig,
    VerifiedMessage,
    aggregate,
    approve,
    sign_message,
)
from fastset.expr import Balance, BinOp, lit
from fastset.claims import verify as verify_claim
from fastset.validator import (
    BAD_SIGNATURE,
    CONFLICTING_PENDING,
    INVALID_BLOCK,
    NOT_OWNER,
    QUEUED,
    REJECTED,
    SETTLED,
    SETTLED_INERT,
    STALE_OR_FUTURE,
    WRONG_NONCE,
    Validator,
    ValidatorOptions,
)

ALICE = KeyPair.from_name("alice")
BOB = KeyPair.from_name("bob")
CHARLIE = KeyPair.from_name("charlie")
KEYS = [KeyPair.from_name(f"v{i}") for i in range(4)]
CFG = QuorumConfig([k.address for k in KEYS], 1)


def make_validators(balances, **opts):
    state = genesis(balances)
    return [Validator(k, CFG, state, ValidatorOptions(**opts)) for k in KEYS]


def pay(key, to, value, nonce, ts=0):
    s = ClientSession(key)
    s.nonces[key.address] = nonce
    return s.submit(key.address, [transfer(key.address, to.address, value)], ts)


def certify(msg, keys=KEYS[:3]):
    return aggregate(msg, {k.address: approve(k, msg) for k in keys}, CFG)


def vm(msg):
    return VerifiedMessage(msg, ())


def test_approves_a_valid_message_and_sets_pending():
    v = make_validators({ALICE.address: 10})[0]
    m = pay(ALICE, BOB, 4, 0)
    assert v.handle_verified(vm(m), 0)
    assert v.pending(ALICE.address) == m
    assert v.state.balance(ALICE.address) == 10  # approval does not touch the state
    assert v.handle_verified(vm(m), 0)  # resend is approved again


@pytest.mark.parametrize("case,reason", [
    ("nonce", WRONG_NONCE),
    ("conflict", CONFLICTING_PENDING),
    ("invalid", INVALID_BLOCK),
    ("future", STALE_OR_FUTURE),
    ("owner", NOT_OWNER),
    ("signature", BAD_SIGNATURE),
])
def test_rejections(case, reason):
    v = make_validators({ALICE.address: 10})[0]
    if case == "nonce":
        m = pay(ALICE, BOB, 1, 3)
    elif case == "conflict":
        assert v.handle_verified(vm(pay(ALICE, BOB, 1, 0)), 0)
        m = pay(ALICE, BOB, 2, 0)
    elif case == "invalid":
        m = pay(ALICE, BOB, 11, 0)
    elif case == "future":
        m = pay(ALICE, BOB, 1, 0, ts=10_000)
    elif case == "owner":
        block = ClaimBlock((transfer(ALICE.address, BOB.address, 1),))
        m = sign_message(BOB, block, 0, 0)
    else:
        good = pay(ALICE, BOB, 1, 0)
        m = type(good)(good.block, good.nonce, good.timestamp, good.sender, b"\x02" + b"0" * 32)
    r = v.handle_verified(vm(m), 0)
    assert not r
    assert r.reason == reason


def test_certificates_settle_in_nonce_order():
    v = make_validators({ALICE.address: 10})[0]
    m0, m1 = pay(ALICE, BOB, 3, 0), pay(ALICE, BOB, 4, 1)
    assert v.handle_certificate(certify(m1)).kind == QUEUED
    assert v.drain() == []
    assert len(v.presettled) == 1
    v.handle_certificate(certify(m0))
    events = v.drain()
    assert [e.kind for e in events] == [SETTLED, SETTLED]
    assert [e.nonce for e in events] == [0, 1]
    assert v.state.balance(BOB.address) == 7
    assert v.presettled == {}
    assert v.handle_certificate(certify(m0)).kind == REJECTED


def test_bad_certificate_is_ignored():
    v = make_validators({ALICE.address: 10})[0]
    m = pay(ALICE, BOB, 3, 0)
    weak = Certificate(m, {k.address: approve(k, m) for k in KEYS[:2]})
    assert v.handle_certificate(weak).kind == REJECTED
    assert v.presettled == {}


def _race(resolution):
    """Alice's guard ``balance(bob) == 0`` is approved, then Charlie pays Bob first."""
    v = make_validators({ALICE.address: 1, CHARLIE.address: 1},
                        enforce_monotonicity_resolution=resolution)[0]
    cond = BinOp("==", Balance(lit(BOB.address)), lit(0))
    m = ClientSession(ALICE).submit(ALICE.address, [guard(ALICE.address, cond)], 0)
    assert v.handle_verified(vm(m), 0)
    v.handle_certificate(certify(pay(CHARLIE, BOB, 1, 0)))
    events = v.drain()
    v.handle_certificate(certify(m))
    return v, events + v.drain()


def test_resolution_settles_an_invalidated_approved_message_inertly():
    v, events = _race(True)
    assert sorted(e.kind for e in events) == [SETTLED, SETTLED_INERT]
    assert v.presettled == {}
    assert v.nonce(ALICE.address) == 1
    assert v.stuck_accounts() == []


def test_without_resolution_the_account_is_stuck():
    v, events = _race(False)
    assert [e.kind for e in events] == [SETTLED]
    assert len(v.presettled) == 1
    assert v.stuck_accounts() == [ALICE.address]


def test_unapproved_invalid_certificate_stays_presettled():
    # inert settlement only applies to the message this validator approved
    v = make_validators({ALICE.address: 1})[0]
    v.handle_certificate(certify(pay(ALICE, BOB, 5, 0)))
    assert v.drain() == []
    assert len(v.presettled) == 1


# ---------------------------------------------------------------- client proxy


def test_session_nonces_and_ownership():
    s = ClientSession(ALICE)
    m0 = s.submit(ALICE.address, [transfer(ALICE.address, BOB.address, 1)])
    m1 = s.submit(ALICE.address, [transfer(ALICE.address, BOB.address, 1)])
    assert (m0.nonce, m1.nonce) == (0, 1)
    s.release_nonce(m1)
    assert s.next_nonce(ALICE.address) == 1
    with pytest.raises(NotOwner):
        s.submit(BOB.address, [transfer(BOB.address, ALICE.address, 1)])


def test_gather_verifiers_counts_the_issuer():
    s = ClientSession(ALICE)
    claim = verify_claim(ALICE.address, {ALICE.address, BOB.address, CHARLIE.address}, 2)
    m = s.submit(ALICE.address, [claim])
    plan = ProxyPlan(verifiers={BOB.address: Verifier(BOB), CHARLIE.address: Verifier(CHARLIE)})
    vmsg = gather_verifiers(m, [ALICE.address, BOB.address, CHARLIE.address], 2, plan)
    assert len(vmsg.verifier_sigs) == 1
    silent = ProxyPlan(verifiers={BOB.address: Verifier(BOB, responsive=False)})
    with pytest.raises(VerifierQuorumUnreachable):
        gather_verifiers(m, [ALICE.address, BOB.address], 2, silent)


def test_drive_settlement_end_to_end():
    vals = make_validators({ALICE.address: 10})
    m = ClientSession(ALICE).submit(ALICE.address, [transfer(ALICE.address, BOB.address, 6)])
    cert = drive_settlement(vm(m), ProxyPlan(validators=vals), CFG)
    assert len(cert.signers()) >= 3
    assert {v.state_digest() for v in vals} == {vals[0].state_digest()}
    assert vals[0].state.balance(BOB.address) == 6
    again = ClientSession(ALICE).submit(ALICE.address, [transfer(ALICE.address, BOB.address, 6)])
    with pytest.raises(ValidatorQuorumUnreachable):
        drive_settlement(vm(again), ProxyPlan(validators=vals), CFG)
