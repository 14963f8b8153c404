"""Worked weak-independence cases, shared by the oracle tests and the acceptance suite.

Each function returns a list of ``(label, ok, detail)`` triples.
"""

from fastset.claims import genesis, transfer
from fastset.oracle import SmallStateSpace, run, weakly_equivalent, weakly_independent


def cross_client_payments():
    sp = SmallStateSpace(A=3)
    a, b, c = (sp.addr(n) for n in ("alice", "bob", "charlie"))
    v = weakly_independent(transfer(a, b, 1), transfer(b, c, 1), sp)
    return [("cross-client payments are weakly independent", bool(v), v.detail)]


def same_client_payments():
    sp = SmallStateSpace(A=3)
    a, b, c = (sp.addr(n) for n in ("alice", "bob", "charlie"))
    v = weakly_independent(transfer(a, b, 1), transfer(a, c, 1), sp)
    w = v.witness or {}
    ok = not v and w.get("alice") == 1 and not any(w.get(k) for k in ("bob", "charlie"))
    return [("same-client payments not independent, witness alice=1", ok, repr(w))]


def non_transitivity():
    sp = SmallStateSpace(A=3, balances=range(12))
    a, b, c = (sp.addr(n) for n in ("alice", "bob", "charlie"))
    g, g1, g2 = [transfer(a, b, 10)], [transfer(a, c, 100)], [transfer(a, b, 11)]
    first, second, third = weakly_equivalent(g, g1, sp), weakly_equivalent(g1, g2, sp), weakly_equivalent(g, g2, sp)
    w = third.witness or {}
    return [
        ("pay(A,B,10) weakly equivalent to pay(A,C,100)", bool(first), first.detail),
        ("pay(A,C,100) weakly equivalent to pay(A,B,11)", bool(second), second.detail),
        ("pay(A,B,10) vs pay(A,B,11) fails at alice=11", not third and w.get("alice") == 11, repr(w)),
    ]


def interleaved_payments():
    sp = SmallStateSpace(A=3)
    a, b, c = (sp.addr(n) for n in ("alice", "bob", "charlie"))
    s = genesis({a: 1, c: 1})
    c_cb, c_ab, c_ba = transfer(c, b, 1), transfer(a, b, 1), transfer(b, a, 1)
    x, y, z = run([c_cb, c_ab, c_ba], s), run([c_cb, c_ba, c_ab], s), run([c_cb], s)
    ok = x is not None and y is not None and x.accounts == y.accounts == z.accounts
    return [("both interleavings end in the state after c_CB alone", ok,
             "" if ok else f"{x} / {y} / {z}")]


ALL = (cross_client_payments, same_client_payments, non_transitivity, interleaved_payments)
