"""Claim semantics: validity, application, blocks and digests."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastset.claims import (
    ClaimBlock,
    EvalContext,
    GlobalState,
    Invalid,
    PreconditionViolated,
    apply_block,
    apply_claim,
    apply_sequence,
    block_call,
    data_claim,
    derive_address,
    genesis,
    guard,
    is_valid,
    transfer,
    verify,
)
from fastset.encoding import decode, digest, encode
from fastset.expr import BinOp, lit
from fastset.oracle import alias_address

NAMES = ["alice", "bob", "charlie", "dave"]
ADDRS = [alias_address(n) for n in NAMES]


def balances(state, *who):
    return [state.balance(a) for a in who]


# ---------------------------------------------------------------- validity


def test_transfer_within_balance_is_valid(alice, bob):
    s = genesis({alice: 11})
    assert is_valid(transfer(alice, bob, 10), s)


def test_transfer_beyond_balance_is_invalid(alice, charlie):
    s = genesis({alice: 11})
    assert not is_valid(transfer(alice, charlie, 100), s)


def test_tautology_guard_is_valid(alice):
    assert is_valid(guard(alice, BinOp("==", lit(0), lit(0))), genesis())
    assert not is_valid(guard(alice, False), genesis())


def test_own_signature_counts_towards_verify_quorum(alice, bob):
    ctx = EvalContext(verifiers=frozenset(), sender=alice)
    assert is_valid(verify(alice, {alice}, 1), genesis(), ctx)
    assert not is_valid(verify(alice, {bob}, 1), genesis(), ctx)
    ctx_b = EvalContext(verifiers=frozenset({bob}), sender=alice)
    assert is_valid(verify(alice, {alice, bob}, 2), genesis(), ctx_b)


def test_type_mismatch_makes_claim_invalid_not_crash(alice):
    # "a" + 1 cannot be evaluated
    assert not is_valid(guard(alice, BinOp("==", BinOp("+", lit("a"), lit(1)), lit(2))), genesis())
    assert not is_valid(transfer(alice, alice, "ten"), genesis({alice: 20}))


def test_block_call_on_a_missing_contract_is_invalid(alice, bob):
    assert not is_valid(block_call(alice, bob, "pay", 1), genesis({alice: 5}))


# ---------------------------------------------------------------- application


def test_apply_transfer(alice, bob):
    s = apply_claim(transfer(alice, bob, 10), genesis({alice: 11}))
    assert balances(s, alice, bob) == [1, 10]


def test_apply_data_claim_only_grows_settled_set(alice):
    s0 = genesis({alice: 3})
    c = data_claim(alice, "greeting", "hello", 42)
    s1 = apply_claim(c, s0)
    assert s1.accounts == s0.accounts
    assert s1.settled_digests > s0.settled_digests
    assert digest(c) in s1.settled_digests


def test_self_transfer_keeps_balances_and_records_digest(alice):
    c = transfer(alice, alice, 4)
    s = apply_claim(c, genesis({alice: 4}))
    assert s.balance(alice) == 4
    assert digest(c) in s.settled_digests


def test_apply_invalid_claim_raises(alice, bob):
    with pytest.raises(PreconditionViolated):
        apply_claim(transfer(alice, bob, 1), genesis())


def test_negative_transfer_is_invalid(alice, bob):
    assert not is_valid(transfer(alice, bob, -1), genesis({alice: 5}))


# ---------------------------------------------------------------- blocks


def test_three_transfer_sequence_from_the_remark(alice, bob, charlie):
    s = genesis({alice: 1, charlie: 1})
    seq = [transfer(charlie, bob, 1), transfer(alice, bob, 1), transfer(bob, alice, 1)]
    out = apply_sequence(seq, s)
    assert out is not None
    assert balances(out, alice, bob, charlie) == [1, 1, 0]


def test_sequence_invalid_when_bob_pays_first(alice, bob):
    s = genesis({alice: 1})
    assert apply_sequence([transfer(bob, alice, 1), transfer(alice, bob, 1)], s) is None


def test_block_is_atomic_and_reports_first_bad_index(alice, bob):
    s = genesis({alice: 5})
    block = ClaimBlock((transfer(alice, bob, 3), transfer(alice, bob, 3)))
    out = apply_block(block, s)
    assert isinstance(out, Invalid)
    assert out.index == 1
    assert not out


def test_guard_only_block_adds_one_digest(alice):
    s = genesis({alice: 1})
    out = apply_block(ClaimBlock((guard(alice, True),)), s)
    assert out.accounts == s.accounts
    assert len(out.settled_digests) == len(s.settled_digests) + 1


def test_block_requires_one_issuer(alice, bob):
    with pytest.raises(ValueError):
        ClaimBlock((transfer(alice, bob, 1), transfer(bob, alice, 1)))
    with pytest.raises(ValueError):
        ClaimBlock(())


# ---------------------------------------------------------------- digests


def test_digest_is_deterministic_and_covers_the_issuer(alice, bob, charlie):
    c = transfer(alice, charlie, 2)
    assert digest(c) == digest(transfer(alice, charlie, 2))
    assert digest(c) != digest(transfer(bob, charlie, 2))
    assert transfer(alice, charlie, 2) != transfer(bob, charlie, 2)


def _random_claim(rng):
    who = rng.choice(ADDRS)
    kind = rng.randrange(5)
    if kind == 0:
        return transfer(who, rng.choice(ADDRS), rng.randrange(1000))
    if kind == 1:
        return guard(who, BinOp("<=", lit(rng.randrange(9)), lit(rng.randrange(9))))
    if kind == 2:
        return verify(who, set(rng.sample(ADDRS, 2)), rng.randrange(1, 3))
    if kind == 3:
        return data_claim(who, "tag", rng.randrange(10**12), "x" * rng.randrange(4), (1, 2))
    return block_call(who, rng.choice(ADDRS), "blk", rng.randrange(7), frozenset({1, 2}))


def test_serialization_round_trip_on_a_seeded_corpus():
    rng = random.Random(2024)
    for _ in range(100):
        c = _random_claim(rng)
        raw = encode(c)
        back = decode(raw)
        assert back == c
        assert encode(back) == raw


def test_derived_addresses_do_not_collide(alice, bob):
    seen = {derive_address(a, n, i, k) for a in (alice, bob) for n in range(20)
            for i in range(3) for k in ("contract", "instance")}
    assert len(seen) == 2 * 20 * 3 * 2


def test_state_round_trips_through_the_encoding(alice, bob):
    s = apply_claim(data_claim(bob, "x", 1), genesis({alice: 3, bob: 4}))
    assert decode(encode(s)) == s
    assert isinstance(decode(encode(s)), GlobalState)


# ---------------------------------------------------------------- properties

transfers = st.builds(
    lambda i, j, v: transfer(ADDRS[i], ADDRS[j], v),
    st.integers(0, 3), st.integers(0, 3), st.integers(0, 6),
)
start_states = st.lists(st.integers(0, 8), min_size=4, max_size=4).map(
    lambda bs: genesis(dict(zip(ADDRS, bs))))


@settings(max_examples=200, deadline=None)
@given(start_states, st.lists(transfers, max_size=6), st.integers(0, 6))
def test_sequence_prefix_law(s, seq, cut):
    full = apply_sequence(seq, s)
    if full is None:
        return
    gamma, tau = seq[:cut], seq[cut:]
    mid = apply_sequence(gamma, s)
    assert mid is not None
    assert apply_sequence(tau, mid) == full


@settings(max_examples=200, deadline=None)
@given(start_states, transfers)
def test_settled_set_grows_and_validity_is_pure(s, c):
    before = s.digest()
    ok = is_valid(c, s)
    assert s.digest() == before
    if ok:
        assert s.settled_digests <= apply_claim(c, s).settled_digests


@settings(max_examples=200, deadline=None)
@given(start_states, st.lists(transfers, min_size=1, max_size=5))
def test_transfer_blocks_conserve_balance(s, seq):
    issuer = seq[0].issuer
    block = ClaimBlock(tuple(transfer(issuer, ADDRS[i % 4], c.value.value) for i, c in enumerate(seq)))
    out = apply_block(block, s)
    if not isinstance(out, Invalid):
        assert out.total_balance() == s.total_balance()
        assert all(a.balance >= 0 for a in out.accounts.values())
