"""Brute-force checkers for the formal relations between claims.

Everything here is deliberately naive: relations are evaluated straight
from their definitions by enumerating a small, finite state space.  The
universally quantified "for every state" of the definitions becomes "for
every state of a ``SmallStateSpace``", so these functions can falsify a
property but never prove it.

Claims that create accounts are not meant for the pairwise checks: the
address they create is derived from the issuing message, so two orders of
creation never collide.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .claims import (
    CREATION_KINDS,
    CONTRACT,
    AccountData,
    Claim,
    GlobalState,
    Invalid,
    Transfer,
    apply_block,
    apply_sequence,
    guard,
    show_claim,
    transfer,
    user_account,
)
from .crypto import KeyPair
from .encoding import Digest
from .expr import Balance, BinOp, Lit
from .values import Address, FrozenMap, render

DEFAULT_ALIASES = ("alice", "bob", "charlie", "dave")


class OracleError(Exception):
    pass


# --------------------------------------------------------------------------
# the finite state space


def alias_address(alias: str) -> Address:
    return KeyPair.from_name(alias).address


@dataclass(frozen=True)
class FieldSlot:
    """A field of a contract-based account that the space lets vary."""

    account: str
    name: str
    owner: str


@dataclass
class SmallStateSpace:
    """Bounded ``GlobalState`` generator.

    ``A`` user accounts named after ``DEFAULT_ALIASES`` (or ``aliases``) with
    balances in ``[0, B]``; ``balances`` replaces that range when given.
    Each ``FieldSlot`` adds a contract-based account whose field ranges over
    ``range(F)``.  Enumeration order is ``itertools.product`` order, so the
    first witness found is the lexicographically smallest one.
    """

    A: int = 4
    B: int = 4
    F: int = 3
    aliases: Optional[Sequence[str]] = None
    balances: Optional[Sequence[int]] = None
    fields: Sequence[FieldSlot] = ()

    def __post_init__(self) -> None:
        names = tuple(self.aliases) if self.aliases is not None else DEFAULT_ALIASES[: self.A]
        if len(names) != self.A:
            raise ValueError("need exactly A aliases")
        self.names: Tuple[str, ...] = names
        for slot in self.fields:
            for n in (slot.account, slot.owner):
                if n not in self.names:
                    self.names = self.names + (n,)
        self.addresses: Dict[str, Address] = {n: alias_address(n) for n in self.names}
        self.alias: Dict[Address, str] = {a: n for n, a in self.addresses.items()}
        self.users = names
        self.domain = tuple(self.balances) if self.balances is not None else tuple(range(self.B + 1))

    def addr(self, alias: str) -> Address:
        return self.addresses[alias]

    # a point of the space is a tuple: user balances, then field values
    def points(self) -> Iterable[tuple]:
        dims = [self.domain] * len(self.users) + [range(self.F)] * len(self.fields)
        return itertools.product(*dims)

    def state(self, point: tuple) -> GlobalState:
        accounts = {}
        for n, bal in zip(self.users, point):
            if bal:
                accounts[self.addresses[n]] = user_account(self.addresses[n], bal)
        values = point[len(self.users):]
        by_account: Dict[str, dict] = {}
        for slot, v in zip(self.fields, values):
            by_account.setdefault(slot.account, {})[slot.name] = v
        for acc, fs in by_account.items():
            owner = next(s.owner for s in self.fields if s.account == acc)
            addr = self.addresses[acc]
            accounts[addr] = AccountData(CONTRACT, self.addresses[owner], fields=FrozenMap(fs))
        return GlobalState(FrozenMap(accounts))

    def states(self) -> Iterable[Tuple[tuple, GlobalState]]:
        for p in self.points():
            yield p, self.state(p)

    def project(self, state: GlobalState) -> tuple:
        """Inverse of ``state`` up to settled claim digests."""
        out = [state.balance(self.addresses[n]) for n in self.users]
        for slot in self.fields:
            out.append(state.field(self.addresses[slot.account], slot.name))
        return tuple(out)

    def render(self, state: GlobalState) -> Dict[str, object]:
        """``{alias: balance}`` with zero balances left out, plus set fields."""
        out: Dict[str, object] = {}
        for n in self.users:
            b = state.balance(self.addresses[n])
            if b:
                out[n] = b
        for slot in self.fields:
            out[f"{slot.account}.{slot.name}"] = state.field(self.addresses[slot.account], slot.name)
        for addr, acc in state.accounts.items():
            if addr not in self.alias and acc.balance:
                out[render(addr)] = acc.balance
        return out

    def size(self) -> int:
        return len(self.domain) ** len(self.users) * self.F ** len(self.fields)


# --------------------------------------------------------------------------
# denotation of sequences


def run(seq: Sequence[Claim], state: GlobalState) -> Optional[GlobalState]:
    """``⟦γ⟧s``, or ``None`` when ``γ`` is not valid in ``s``."""
    return apply_sequence(seq, state)


@dataclass
class Verdict:
    holds: bool
    witness: Optional[Dict[str, object]] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.holds


def _excluded(c: Claim) -> bool:
    return isinstance(c, CREATION_KINDS)


def weakly_independent(c1: Claim, c2: Claim, space: SmallStateSpace) -> Verdict:
    """``c1 ∥ c2``: when both are valid, both orders are valid and agree."""
    if _excluded(c1) or _excluded(c2):
        raise OracleError("account creation is outside the pairwise oracle")
    for _, s in space.states():
        a = run([c1], s)
        b = run([c2], s)
        if a is None or b is None:
            continue
        ab = run([c2], a)
        ba = run([c1], b)
        if ab is None or ba is None:
            which = "c1 c2" if ab is None else "c2 c1"
            return Verdict(False, space.render(s), f"{which} is not valid")
        if ab != ba:
            return Verdict(False, space.render(s), "orders reach different states")
    return Verdict(True)


def weakly_equivalent(g1: Sequence[Claim], g2: Sequence[Claim], space: SmallStateSpace) -> Verdict:
    """``g1 ⇓ g2``: same final state wherever both are valid."""
    g1, g2 = _as_seq(g1), _as_seq(g2)
    for _, s in space.states():
        a = run(g1, s)
        if a is None:
            continue
        b = run(g2, s)
        if b is not None and a != b:
            return Verdict(False, space.render(s), "both valid, different states")
    return Verdict(True)


def _as_seq(g) -> Tuple[Claim, ...]:
    if isinstance(g, Claim):
        return (g,)
    return tuple(g)


# --------------------------------------------------------------------------
# interleavings


def reduct(g: Sequence[Claim], a: Address) -> Tuple[Claim, ...]:
    return tuple(c for c in g if c.issuer == a)


def is_prefix(p: Sequence, q: Sequence) -> bool:
    return len(p) <= len(q) and tuple(q[: len(p)]) == tuple(p)


@dataclass(frozen=True)
class Relations:
    equivalent: bool
    cut: bool
    a_maximal: frozenset
    compatible: bool


def interleaving_relations(g1: Sequence[Claim], g2: Sequence[Claim]) -> Relations:
    """≡, ⊑, the addresses ``a`` with ``g1 ⊑ₐ g2``, and △, by reduct comparison."""
    addrs = {c.issuer for c in g1} | {c.issuer for c in g2}
    r1 = {a: reduct(g1, a) for a in addrs}
    r2 = {a: reduct(g2, a) for a in addrs}
    equivalent = all(r1[a] == r2[a] for a in addrs)
    cut = all(is_prefix(r1[a], r2[a]) for a in addrs)
    maximal = frozenset(a for a in addrs if cut and r1[a] == r2[a])
    compatible = all(is_prefix(r1[a], r2[a]) or is_prefix(r2[a], r1[a]) for a in addrs)
    return Relations(equivalent, cut, maximal, compatible)


def interleave(rng: random.Random, lanes: Sequence[Sequence[Claim]]) -> List[Claim]:
    """A uniformly random shuffle that keeps each lane's order."""
    tags = [i for i, lane in enumerate(lanes) for _ in lane]
    rng.shuffle(tags)
    pos = [0] * len(lanes)
    out = []
    for i in tags:
        out.append(lanes[i][pos[i]])
        pos[i] += 1
    return out


# --------------------------------------------------------------------------
# theorems by sampling


@dataclass
class TheoremReport:
    checked: Dict[str, int] = field(default_factory=dict)
    vacuous: Dict[str, int] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    rejected: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.rejected is None and not self.failures

    def count(self, name: str, vacuous: bool = False) -> None:
        d = self.vacuous if vacuous else self.checked
        d[name] = d.get(name, 0) + 1

    def render(self) -> str:
        lines = []
        if self.rejected:
            lines.append(f"workload rejected: {self.rejected}")
        for name in sorted(set(self.checked) | set(self.vacuous)):
            lines.append(f"{name}: {self.checked.get(name, 0)} checked, "
                         f"{self.vacuous.get(name, 0)} vacuous")
        lines.extend("counterexample: " + f for f in self.failures)
        lines.append("OK" if self.ok else "FAILED")
        return "\n".join(lines)


def _show_seq(g: Sequence[Claim]) -> str:
    return " ".join(show_claim(c) for c in g) or "ε"


def check_workload(workload: Dict[Address, Sequence[Claim]], space: SmallStateSpace) -> Optional[str]:
    """The standing assumption: lanes are partitioned by issuer and cross-lane pairs are ∥."""
    for a, lane in workload.items():
        for c in lane:
            if c.issuer != a:
                return f"{show_claim(c)} is in the lane of {render(a)}"
    letters = {a: list(dict.fromkeys(lane)) for a, lane in workload.items()}
    for a, b in itertools.combinations(letters, 2):
        for c1 in letters[a]:
            for c2 in letters[b]:
                v = weakly_independent(c1, c2, space)
                if not v:
                    return f"{show_claim(c1)} and {show_claim(c2)} are not weakly independent at {v.witness}"
    return None


def check_theorems(workload: Dict[Address, Sequence[Claim]], space: SmallStateSpace,
                   samples: int = 200, seed: int = 0) -> TheoremReport:
    """Sample states, interleavings and cuts; check determinism, monotonicity and liveness."""
    report = TheoremReport()
    bad = check_workload(workload, space)
    if bad is not None:
        report.rejected = bad
        return report
    rng = random.Random(seed)
    addrs = sorted(workload)
    lanes = [tuple(workload[a]) for a in addrs]
    points = list(space.points())
    for _ in range(samples):
        s = space.state(rng.choice(points))
        lens = [rng.randint(0, len(l)) for l in lanes]
        pre = [l[:n] for l, n in zip(lanes, lens)]

        # determinism: two interleavings of the same reducts
        g1, g2 = interleave(rng, pre), interleave(rng, pre)
        r1, r2 = run(g1, s), run(g2, s)
        if r1 is None or r2 is None:
            report.count("determinism", vacuous=True)
        else:
            report.count("determinism")
            if r1 != r2:
                report.failures.append(f"determinism: {_show_seq(g1)} vs {_show_seq(g2)} at {space.render(s)}")

        # monotonicity: γ ⊑ₐ γ′, then the next claim of a
        i = rng.randrange(len(lanes))
        if lens[i] < len(lanes[i]):
            c = lanes[i][lens[i]]
            cut = [p if j == i else p[: rng.randint(0, len(p))] for j, p in enumerate(pre)]
            g, gp = interleave(rng, cut), interleave(rng, pre)
            rg, rgp = run(g, s), run(gp, s)
            if rg is None or rgp is None or run([c], rg) is None:
                report.count("monotonicity", vacuous=True)
            else:
                report.count("monotonicity")
                if run([c], rgp) is None:
                    report.failures.append(
                        f"monotonicity: {_show_seq(g)} c={show_claim(c)} valid but not after "
                        f"{_show_seq(gp)} at {space.render(s)}")

        # liveness: γ △ γ′ with γ′ not a cut of γ
        other = [l[: rng.randint(0, len(l))] for l in lanes]
        g, gp = interleave(rng, pre), interleave(rng, other)
        if interleaving_relations(gp, g).cut:
            report.count("liveness", vacuous=True)
            continue
        rg, rgp = run(g, s), run(gp, s)
        if rg is None or rgp is None:
            report.count("liveness", vacuous=True)
            continue
        report.count("liveness")
        found = False
        for j, a in enumerate(addrs):
            mine, theirs = pre[j], other[j]
            if len(theirs) > len(mine) and run([theirs[len(mine)]], rg) is not None:
                found = True
                break
        if not found:
            report.failures.append(f"liveness: no progress from {_show_seq(g)} towards "
                                   f"{_show_seq(gp)} at {space.render(s)}")
    return report


# --------------------------------------------------------------------------
# exhaustive monotonicity


def payment_alphabet(space: SmallStateSpace) -> Dict[Address, List[Claim]]:
    """Per-address claims that respect the address partition.

    Each user pays the next user 1, pays the previous user 2, and asserts a
    monotone lower bound on its own balance.
    """
    users = [space.addr(n) for n in space.users]
    out = {}
    for i, a in enumerate(users):
        nxt, prv = users[(i + 1) % len(users)], users[i - 1]
        out[a] = [
            transfer(a, nxt, 1),
            transfer(a, prv, 2),
            guard(a, BinOp(">=", Balance(Lit(a)), Lit(2))),
        ]
    return out


def exact_balance_alphabet(space: SmallStateSpace) -> Dict[Address, List[Claim]]:
    """Like ``payment_alphabet`` but with an upper-bound guard, which is not ∥ with incoming payments."""
    out = payment_alphabet(space)
    for a, letters in out.items():
        letters[2] = guard(a, BinOp("<=", Balance(Lit(a)), Lit(1)))
    return out


@dataclass
class ExhaustiveReport:
    lanes: int = 0
    cases: int = 0
    counterexamples: List[str] = field(default_factory=list)
    rejected: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.rejected is None and not self.counterexamples


def _words(letters: Sequence[Claim], n: int):
    return itertools.product(letters, repeat=n)


def monotonicity_exhaustive(space: SmallStateSpace, alphabet: Optional[Dict[Address, List[Claim]]] = None,
                            max_len: int = 5, max_counterexamples: int = 5,
                            check_assumption: bool = True) -> ExhaustiveReport:
    """Check ``(γ c)↓s ∧ γ ⊑ₐ γ′ ∧ γ′↓s ⇒ (γ′ c)↓s`` for every γ′ with ``|γ′| ≤ max_len``.

    γ′ ranges over all interleavings of all per-address words, γ over every
    a-maximal cut of it, s over the space and c over a's letters.  The set
    of states reachable through valid interleavings of given per-address
    prefixes is computed once by dynamic programming over prefix-length
    vectors, which covers every interleaving without listing them.
    States are tracked as projections (balances and fields), so the
    alphabet must not read settled digests.
    """
    alphabet = alphabet if alphabet is not None else payment_alphabet(space)
    report = ExhaustiveReport()
    if check_assumption:
        bad = check_workload(alphabet, space)
        if bad is not None:
            report.rejected = bad
            return report
    addrs = sorted(alphabet)
    letters = [tuple(alphabet[a]) for a in addrs]
    step_memo: Dict[tuple, Optional[tuple]] = {}

    def step(point: tuple, c: Claim) -> Optional[tuple]:
        key = (point, c)
        if key not in step_memo:
            out = run([c], space.state(point))
            step_memo[key] = None if out is None else space.project(out)
        return step_memo[key]

    k = len(addrs)
    for total in range(max_len + 1):
        for lens in _compositions(total, k):
            for words in itertools.product(*(list(_words(letters[i], lens[i])) for i in range(k))):
                report.lanes += 1
                vectors = list(itertools.product(*(range(n + 1) for n in lens)))
                for s in space.points():
                    reach = _reach(s, words, vectors, step)
                    finals = reach[tuple(lens)]
                    if not finals:
                        continue
                    for i in range(k):
                        cuts = [v for v in vectors if v[i] == lens[i]]
                        for c in letters[i]:
                            after = [step(t, c) is not None for t in finals]
                            if all(after):
                                continue
                            for v in cuts:
                                for t in reach[v]:
                                    report.cases += 1
                                    if step(t, c) is None:
                                        continue
                                    if len(report.counterexamples) < max_counterexamples:
                                        report.counterexamples.append(
                                            f"s={space.render(space.state(s))} lanes="
                                            f"{[_show_seq(w) for w in words]} cut={v} "
                                            f"c={show_claim(c)}")
                                    else:
                                        return report
                                    break
    return report


def _compositions(total: int, k: int):
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


def _reach(start: tuple, words, vectors, step) -> Dict[tuple, set]:
    """States reachable through valid interleavings of each prefix-length vector."""
    reach: Dict[tuple, set] = {}
    for v in vectors:  # product order visits predecessors first
        if not any(v):
            reach[v] = {start}
            continue
        out = set()
        for i, n in enumerate(v):
            if n == 0:
                continue
            prev = v[:i] + (n - 1,) + v[i + 1:]
            c = words[i][n - 1]
            for t in reach[prev]:
                nt = step(t, c)
                if nt is not None:
                    out.add(nt)
        reach[v] = out
    return reach


# --------------------------------------------------------------------------
# linearizing certificates


@dataclass
class Linearization:
    state: GlobalState
    order: List[Digest]
    inert: List[Digest]
    leftover: List[Digest]


def linearize(genesis: GlobalState, certificates, seed: int = 0, resolution: bool = True,
              budget: int = 100_000, published: Optional[Mapping[Digest, int]] = None) -> Linearization:
    """Apply the certified messages in one seeded order that respects nonces.

    The search picks a random account whose next message is valid and backs
    off when it paints itself into a corner.  When no fully valid order
    exists and ``resolution`` is on, blocked messages settle without effect,
    in random order.

    ``published`` maps message digests to the time their certificate was
    first sent out.  When given, the order also respects causality: a
    message signed at or after another's certificate went out comes after
    it, since its issuer may have acted on that outcome.
    """
    from .validator import settle_context

    msgs: Dict[Digest, object] = {}
    slots: Dict[Tuple[Address, int], Digest] = {}
    for cert in certificates:
        m = getattr(cert, "message", cert)
        d = m.digest()
        msgs[d] = m
        prev = slots.setdefault((m.account, m.nonce), d)
        if prev != d:
            raise OracleError(f"two certified messages for {render(m.account)} at nonce {m.nonce}")
    by_account: Dict[Address, List] = {}
    for (a, n), d in sorted(slots.items()):
        by_account.setdefault(a, []).append(msgs[d])
    accounts = sorted(by_account)
    rng = random.Random(seed)
    nodes = 0
    after: Dict[Digest, List[Tuple[Address, int]]] = {}
    if published:
        index = {m.digest(): (a, i) for a, lane in by_account.items() for i, m in enumerate(lane)}
        for d, m in msgs.items():
            after[d] = [index[d1] for d1, t in published.items()
                        if d1 != d and d1 in index and t <= m.timestamp]

    def ready(pos):
        out = []
        for a in accounts:
            lane = by_account[a]
            i = pos[a]
            if i < len(lane) and lane[i].nonce == (lane[i - 1].nonce + 1 if i else 0):
                if all(pos[b] > j for b, j in after.get(lane[i].digest(), ())):
                    out.append(a)
        return out

    def search(state, pos, order):
        nonlocal nodes
        nodes += 1
        cand = ready(pos)
        if not cand:
            return state, order
        rng.shuffle(cand)
        for a in cand:
            m = by_account[a][pos[a]]
            nxt = apply_block(m.block, state, settle_context(m))
            if isinstance(nxt, Invalid):
                continue
            pos[a] += 1
            order.append(m.digest())
            got = search(nxt, pos, order)
            if got is not None:
                return got
            pos[a] -= 1
            order.pop()
            if nodes > budget:
                break
        return None

    pos = {a: 0 for a in accounts}
    found = search(genesis, pos, [])
    if found is not None:
        state, order = found
        return Linearization(state, list(order), [], _leftover(by_account, pos))
    if not resolution:
        raise OracleError("no valid linearization of the certified messages")
    # greedy with inert settlement of blocked heads
    state, order, inert = genesis, [], []
    pos = {a: 0 for a in accounts}
    while True:
        cand = ready(pos)
        if not cand:
            break
        rng.shuffle(cand)
        progressed = False
        for a in cand:
            m = by_account[a][pos[a]]
            nxt = apply_block(m.block, state, settle_context(m))
            if not isinstance(nxt, Invalid):
                state = nxt
                order.append(m.digest())
                pos[a] += 1
                progressed = True
                break
        if not progressed:
            a = cand[0]
            m = by_account[a][pos[a]]
            inert.append(m.digest())
            order.append(m.digest())
            pos[a] += 1
    return Linearization(state, order, inert, _leftover(by_account, pos))


def _leftover(by_account, pos) -> List[Digest]:
    return [m.digest() for a, lane in by_account.items() for m in lane[pos[a]:]]


def oracle_state(genesis: GlobalState, certificates, seed: int = 0, resolution: bool = True,
                 published: Optional[Mapping[Digest, int]] = None) -> GlobalState:
    lin = linearize(genesis, certificates, seed=seed, resolution=resolution, published=published)
    if lin.leftover:
        raise OracleError(f"{len(lin.leftover)} certified messages follow a nonce gap")
    return lin.state


def oracle_digest(genesis: GlobalState, certificates, seed: int = 0, resolution: bool = True,
                  published: Optional[Mapping[Digest, int]] = None) -> Digest:
    """State digest after one valid linearization of ``certificates``."""
    return oracle_state(genesis, certificates, seed=seed, resolution=resolution,
                        published=published).digest()
