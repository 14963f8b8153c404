"""Reference oracle: weak independence, interleavings, theorems, linearization."""

import pytest
from oracle_fixtures import ALL

from fastset.claims import data_claim, genesis, transfer
from fastset.oracle import (
    OracleError,
    SmallStateSpace,
    check_theorems,
    exact_balance_alphabet,
    interleaving_relations,
    monotonicity_exhaustive,
    oracle_digest,
    payment_alphabet,
    run,
    weakly_independent,
)
from fastset.claims import CreateInstance


@pytest.mark.parametrize("fixture", ALL, ids=[f.__name__ for f in ALL])
def test_worked_fixture(fixture):
    for label, ok, detail in fixture():
        assert ok, f"{label}: {detail}"


def test_interleaved_payments_differ_only_in_settled_digests():
    # the two interleavings also record c_AB and c_BA as settled, so the
    # full states match each other but not the state after c_CB alone
    sp = SmallStateSpace(A=3)
    a, b, c = (sp.addr(n) for n in ("alice", "bob", "charlie"))
    s = genesis({a: 1, c: 1})
    x = run([transfer(c, b, 1), transfer(a, b, 1), transfer(b, a, 1)], s)
    y = run([transfer(c, b, 1), transfer(b, a, 1), transfer(a, b, 1)], s)
    z = run([transfer(c, b, 1)], s)
    assert x == y
    assert x != z and x.settled_digests > z.settled_digests


def test_creation_claims_are_outside_the_pairwise_oracle():
    sp = SmallStateSpace(A=2)
    a, b = sp.addr("alice"), sp.addr("bob")
    with pytest.raises(OracleError):
        weakly_independent(CreateInstance(a, b), transfer(b, a, 1), sp)


def test_data_claims_commute_with_everything():
    sp = SmallStateSpace(A=2)
    a, b = sp.addr("alice"), sp.addr("bob")
    assert weakly_independent(data_claim(a, "x", 1), transfer(a, b, 1), sp)


def test_interleaving_relations():
    sp = SmallStateSpace(A=2)
    a, b = sp.addr("alice"), sp.addr("bob")
    ca, cb, ca2 = transfer(a, b, 1), transfer(b, a, 1), transfer(a, b, 2)
    assert interleaving_relations([ca, cb], [cb, ca]).equivalent
    r = interleaving_relations([ca], [cb, ca, ca2])
    assert r.cut and not r.equivalent
    assert not interleaving_relations([ca, ca2], [ca2]).compatible


def test_sampled_theorems_on_the_payment_workload():
    sp = SmallStateSpace(A=3, B=4)
    report = check_theorems(payment_alphabet(sp), sp, samples=300, seed=1)
    assert report.ok, report.render()
    assert report.checked.get("determinism", 0) > 0
    assert report.checked.get("monotonicity", 0) > 0


def test_workload_violating_the_partition_is_rejected():
    sp = SmallStateSpace(A=2)
    a, b = sp.addr("alice"), sp.addr("bob")
    report = check_theorems({a: [transfer(b, a, 1)]}, sp, samples=5)
    assert report.rejected and not report.ok


def test_exhaustive_monotonicity_small():
    sp = SmallStateSpace(A=2, B=3)
    report = monotonicity_exhaustive(sp, max_len=3)
    assert report.ok and report.cases > 0


def test_non_independent_alphabet_is_rejected_or_falsified():
    sp = SmallStateSpace(A=2, B=3)
    assert monotonicity_exhaustive(sp, exact_balance_alphabet(sp), max_len=3).rejected
    unchecked = monotonicity_exhaustive(sp, exact_balance_alphabet(sp), max_len=3, check_assumption=False)
    assert unchecked.counterexamples


def test_oracle_digest_of_no_certificates_is_the_genesis_digest():
    sp = SmallStateSpace(A=2)
    g = genesis({sp.addr("alice"): 3})
    assert oracle_digest(g, []) == g.digest()


def test_mutex_acquisition_is_not_weakly_independent():
    """Two acquisitions of one lock: each is a guard on the flag plus a write."""
    from fastset.claims import FieldWrite, Guard, When
    from fastset.expr import BinOp, Field, Lit
    from fastset.oracle import FieldSlot

    sp = SmallStateSpace(A=1, B=0, F=3, fields=[FieldSlot("lock", "holder", "alice")])
    lock = sp.addr("lock")
    free = BinOp("==", Field(Lit(lock), "holder"), Lit(0))

    def acquire(who):
        return [Guard(lock, free), FieldWrite(lock, lock, "holder", Lit(who))]

    s = sp.state((0, 0))
    assert run(acquire(1), s) is not None and run(acquire(2), s) is not None
    assert run(acquire(1) + acquire(2), s) is None
    assert run(acquire(2) + acquire(1), s) is None
    # as conditional claims both orders are valid but disagree on the holder
    v = weakly_independent(When(lock, free, tuple(acquire(1)[1:])), When(lock, free, tuple(acquire(2)[1:])), sp)
    assert not v and v.witness["lock.holder"] == 0


def test_one_claim_commutes_past_independent_sequences_exhaustively():
    """c ∥ c_i for all i: c c_1..c_k and c_1..c_k c agree wherever c and c_1..c_k are valid (k <= 3)."""
    import itertools

    sp = SmallStateSpace(A=3, B=3)
    alphabet = payment_alphabet(sp)
    alice = sp.addr("alice")
    others = [c for a, cs in alphabet.items() if a != alice for c in cs]
    for c in alphabet[alice]:
        assert all(weakly_independent(c, ci, sp) for ci in others)
    states = [s for _, s in sp.states()]
    checked = 0
    for k in range(4):
        for seq in itertools.product(others, repeat=k):
            seq = list(seq)
            for c in alphabet[alice]:
                for s in states:
                    if run([c], s) is None or run(seq, s) is None:
                        continue
                    front, back = run([c] + seq, s), run(seq + [c], s)
                    assert front is not None and back is not None and front == back
                    checked += 1
    assert checked > 1000
