"""Classification of RDP configurations on supersingular K3 surfaces.

A candidate is a triple ``[R, n, p]``: a rank-21 ADE type R, the degree n of
a polarisation (an even positive integer) and a characteristic p. It is
realizable with Artin invariant sigma when some isotropic subgroup S of
``G = G_R + G_n`` satisfies the four conditions checked by
:func:`check_conditions`:

1. ``S^perp / S`` is p-elementary of order ``p^(2 sigma)``;
2. ``S`` meets ``G_n`` trivially;
3. the overlattice of ``Q(R)`` defined by ``S cap G_R`` has no new roots;
4. for ``p = 2`` the overlattice ``Lambda_S`` is of type I.

The search splits the primes of ``|G_R|`` into a set A containing p and its
complement B. On the B side only subgroups with ``|S_B|^2 = |G_B|`` matter,
on the A side the per-sigma conditions are tested, and the two sides are
combined. Primes are coupled only through glue components whose order has
more than one prime factor (A_5, A_11, ...), since only those can carry a
root whose class mixes primes; uncoupled blocks are searched independently
and only need one witness each.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .adelattice import (
    AdeType,
    all_types,
    component_glue,
    format_ade,
    gram_of,
    group_order,
    level_of,
    order_of_glue,
    ordp,
    prime_factors,
    rho_of_glue,
    root_count_of,
)
from .discform import (
    FiniteQuadraticModule,
    PrimeSubgroup,
    Subgroup,
    fqm_of_type,
    is_p_elementary,
    is_type_I,
    overlattice,
    to_classes,
)
from .exactlin import det
from .symmetry import BudgetExceeded, GlueSpace, IsotropicSearch, Node, _combine

MAX_SIGMA = 10
RANK = 21


# ---------------------------------------------------------------------------
# Candidates


@dataclass(frozen=True, order=True)
class RdpCandidate:
    """A triple [R, n, p]."""

    r: AdeType
    n: int
    p: int

    def key(self) -> str:
        return f"{format_ade(self.r)}/{self.n}/{self.p}"


def np_set(r: AdeType) -> set[tuple[int, int]]:
    """Pairs (n, p) allowed by the finiteness conditions.

    p runs over the primes of ``|G_R|``; n is even with ``2n | N_R p^2``,
    ``p^2 | n |G_R|`` and ``n |G_R|`` a perfect square.
    """
    g = order_of_glue(r)
    big_n = level_of(r)
    out = set()
    for p in prime_factors(g) if g > 1 else []:
        m = big_n * p * p
        for n in range(2, m // 2 + 1, 2):
            if m % (2 * n):
                continue
            if (n * g) % (p * p):
                continue
            if math.isqrt(n * g) ** 2 != n * g:
                continue
            out.add((n, p))
    return out


def build_candidates(rank: int = RANK) -> tuple[list[RdpCandidate], list[tuple[AdeType, int]]]:
    """All triples [R, n, p] with rank(R) = rank, and their (R, n) projections."""
    triples = []
    pairs = set()
    for r in all_types(rank):
        for n, p in sorted(np_set(r), key=lambda t: (t[1], t[0])):
            triples.append(RdpCandidate(r, n, p))
            pairs.add((r, n))
    return triples, sorted(pairs, key=lambda t: (t[0].symbols, t[1]))


def p_exponent(r: AdeType, p: int) -> int:
    """Least mu with p^mu killing the p-part of G_R."""
    mu = 0
    for sym in r.symbols:
        glue = component_glue(sym)
        if glue.kind == "v4":
            e = 1 if p == 2 else 0
        else:
            e = ordp(glue.order, p) if glue.order > 1 else 0
        mu = max(mu, e)
    return mu


def pruning_reason(c: RdpCandidate) -> str | None:
    """Why a candidate can be dropped before any search, or None.

    ``"n-too-divisible"``: ord_p(n) >= mu + 2, so ``S^perp/S`` would contain
    an element of order p^2.
    ``"anisotropic-3-part"`` (cases i-iv) and ``"anisotropic-7-part"``: with
    the default split the B side contains a prime whose part is a plane with
    no nonzero isotropic vector, so no subgroup with ``|S_B|^2 = |G_B|``
    exists.
    """
    r, n, p = c.r, c.n, c.p
    g = order_of_glue(r)
    if ordp(n, p) >= p_exponent(r, p) + 2:
        return "n-too-divisible"
    a2, a5, a6 = r.count(("A", 2)), r.count(("A", 5)), r.count(("A", 6))
    if p != 3 and g % 3 == 0:
        o3, n3 = ordp(g, 3), ordp(n, 3)
        if o3 == 2 and n3 == 0 and a2 == 2:
            return "anisotropic-3-part(i)"
        if o3 == 2 and n3 == 0 and a5 == 2:
            return "anisotropic-3-part(ii)"
        if o3 == 1 and n3 == 1 and (n // 3) % 6 == 4 and a2 == 1:
            return "anisotropic-3-part(iii)"
        if o3 == 1 and n3 == 1 and (n // 3) % 6 == 2 and a5 == 1:
            return "anisotropic-3-part(iv)"
    if p != 7 and g % 7 == 0:
        if ordp(g, 7) == 2 and ordp(n, 7) == 0 and a6 == 2:
            return "anisotropic-7-part"
    return None


@dataclass
class PruneReport:
    kept: list[RdpCandidate]
    removed: list[tuple[RdpCandidate, str]]
    removed_pairs: int


def prune(candidates: Sequence[RdpCandidate]) -> PruneReport:
    """Drop candidates excluded by the pruning rules.

    A pair (R, n) counts as removed when all of its triples are removed.
    """
    kept, removed = [], []
    for c in candidates:
        why = pruning_reason(c)
        if why is None:
            kept.append(c)
        else:
            removed.append((c, why))
    all_pairs = {(c.r, c.n) for c in candidates}
    kept_pairs = {(c.r, c.n) for c in kept}
    return PruneReport(kept, removed, len(all_pairs - kept_pairs))


# ---------------------------------------------------------------------------
# The four conditions


@dataclass
class ConditionReport:
    isotropic: bool
    elementary_quotient: bool
    meets_n_trivially: bool
    no_new_roots: bool
    type_one: bool
    det_check: bool

    @property
    def ok(self) -> bool:
        return (self.isotropic and self.elementary_quotient and self.meets_n_trivially
                and self.no_new_roots and self.type_one and self.det_check)


def check_conditions(r: AdeType, n: int | None, p: int, sigma: int,
                     gens: Iterable[Sequence[int]]) -> ConditionReport:
    """Evaluate the realizability conditions for S = <gens> from scratch.

    ``gens`` are elements of ``fqm_of_type(r, n)``. Besides the quotient test
    on the discriminant form, the overlattice is built explicitly and its
    determinant must be ``+-p^(2 sigma)`` with p-elementary discriminant.
    """
    f = fqm_of_type(r, n)
    gens = [f.reduce(g) for g in gens]
    s = Subgroup.generated(f, gens)
    isotropic = s.is_isotropic()
    if not isotropic:
        return ConditionReport(False, False, False, False, False, False)
    perp = s.orthogonal()
    elementary = all(s.contains(f.scale(p, g)) for g in perp.generators())
    elementary = elementary and perp.order == s.order * p ** (2 * sigma)
    meets = True
    if n is not None and n > 1:
        last = f.ngens - 1
        for l in prime_factors(n):
            e = [0] * f.ngens
            e[last] = n // l
            if s.contains(e):
                meets = False
    k = len(r.symbols)
    glue0 = []
    for x in s.elements():
        cl = to_classes(r, f, x)
        if n is not None and n > 1 and cl[-1] % n:
            continue
        glue0.append(cl[:k])
    roots_ok = rho_of_glue(r, glue0) == root_count_of(r)
    lat = gram_of(r, n)
    over = overlattice(lat, f, gens)
    type_one = True
    if p == 2:
        type_one = is_type_I(over.gram)
    d = abs(det(over.gram))
    det_ok = d == p ** (2 * sigma) and is_p_elementary(over.gram, p)
    return ConditionReport(True, elementary, meets, roots_ok, type_one, det_ok)


# ---------------------------------------------------------------------------
# Results


@dataclass
class RdpResult:
    """Outcome for one candidate.

    Attributes:
        candidate: The triple.
        sigmas: Artin invariants found realizable.
        witnesses: One generator list per sigma (elements of ``fqm_of_type(R, n)``).
        status: ``"complete"`` when ``sigmas`` is exact, ``"undecided"`` when a
            budget ran out (sigmas found so far are still valid).
        telemetry: Search statistics.
    """

    candidate: RdpCandidate
    sigmas: list[int]
    witnesses: dict[int, list[tuple[int, ...]]] = field(default_factory=dict)
    status: str = "complete"
    telemetry: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        c = self.candidate
        return {
            "R": format_ade(c.r), "n": c.n, "p": c.p,
            "sigmas": self.sigmas,
            "witnesses": {str(s): [list(g) for g in w] for s, w in sorted(self.witnesses.items())},
            "status": self.status,
            "telemetry": self.telemetry,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RdpResult":
        from .adelattice import parse_ade
        c = RdpCandidate(parse_ade(d["R"]), d["n"], d["p"])
        w = {int(s): [tuple(g) for g in gs] for s, gs in d["witnesses"].items()}
        return cls(c, list(d["sigmas"]), w, d["status"], d.get("telemetry", {}))


@dataclass
class Partition:
    """Disjoint prime sets A (containing p) and B covering the primes of G."""

    a: tuple[int, ...]
    b: tuple[int, ...]

    @classmethod
    def default(cls, primes: Iterable[int], p: int) -> "Partition":
        primes = sorted(set(primes))
        return cls((p,), tuple(l for l in primes if l != p))

    @classmethod
    def trivial(cls, primes: Iterable[int], p: int) -> "Partition":
        return cls(tuple(sorted(set(primes))), ())


def coupled_blocks(r: AdeType, primes: Iterable[int]) -> list[tuple[int, ...]]:
    """Split primes into blocks joined by components of mixed-prime order."""
    primes = sorted(set(primes))
    parent = {l: l for l in primes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for sym in set(r.symbols):
        ps = [l for l in prime_factors(group_order(sym)) if l in parent] if group_order(sym) > 1 else []
        for a, b in zip(ps, ps[1:]):
            parent[find(a)] = find(b)
    blocks: dict[int, list[int]] = {}
    for l in primes:
        blocks.setdefault(find(l), []).append(l)
    return sorted(tuple(v) for v in blocks.values())


def _log(x: int, p: int) -> int | None:
    e = 0
    while x % p == 0 and x > 1:
        x //= p
        e += 1
    return e if x == 1 else None


def feasible_sigmas(f: FiniteQuadraticModule, p: int) -> list[int]:
    """Sigmas allowed by the size of the p-part alone."""
    order = 1
    for m in f.primary(p).orders:
        order *= m
    e = _log(order, p) or 0
    if e % 2:
        return []
    return list(range(1, min(MAX_SIGMA, e // 2) + 1))


class _Budget:
    def __init__(self, node_budget: int | None, time_budget: float | None):
        self.node_budget = node_budget
        self.deadline = None if time_budget is None else time.monotonic() + time_budget
        self.nodes = 0

    def search(self, space: GlueSpace, max_order: dict[int, int] | None) -> IsotropicSearch:
        nb = None if self.node_budget is None else max(1, self.node_budget - self.nodes)
        tb = None if self.deadline is None else max(0.0, self.deadline - time.monotonic())
        return IsotropicSearch(space, node_budget=nb, time_budget=tb, max_order=max_order)

    def charge(self, search: IsotropicSearch) -> None:
        self.nodes += search.stats.nodes


def sigma_of(node: Node, part_p, p: int) -> int | None:
    """Sigma for which the p-part of a node passes the quotient and type tests."""
    s = node.parts[p]
    perp = node.perp(p)
    orders = part_p.orders
    for g in perp.generators():
        if not s.contains(tuple(p * a % o for a, o in zip(g, orders))):
            return None
    e = _log(perp.order // s.order, p)
    if e is None or e % 2 or e == 0:
        return None
    if p == 2 and any(part_p.fqm.q_value(g).denominator != 1 for g in perp.generators()):
        return None
    return e // 2


def _is_lagrangian(node: Node, space: GlueSpace, l: int) -> bool:
    total = 1
    for m in space.parts[l].orders:
        total *= m
    return node.parts[l].order ** 2 == total


def _lagrangian_caps(space: GlueSpace, primes: Iterable[int]) -> dict[int, int] | None:
    caps = {}
    for l in primes:
        total = 1
        for m in space.parts[l].orders:
            total *= m
        root = math.isqrt(total)
        if root * root != total:
            return None
        caps[l] = root
    return caps


@dataclass
class SplitOutcome:
    """Raw result of a split search.

    Attributes:
        found: sigma -> list of combined witnesses; each witness maps prime -> PrimeSubgroup.
        complete: Whether every search finished (or stopped once nothing was left to find).
        telemetry: Counters.
    """

    found: dict[int, list[dict[int, PrimeSubgroup]]]
    complete: bool
    telemetry: dict


class SplitSearch:
    """Searches ``S = S_A x S_B`` for one characteristic p.

    Args:
        r: Root type.
        n: Polarisation degree, or None for no I(n) summand.
        p: Characteristic.
        partition: The A/B split (default: A = {p}).
        collect: Keep every combination per sigma instead of one witness.
        want: Sigmas to look for (default: all feasible ones). The search stops
            early once all of them have a witness, unless ``collect`` is set.
        first_only: Stop at the first sigma found.
        node_budget, time_budget: Shared budgets for all searches.
        fixed: Component indices the symmetry group must not move.
    """

    def __init__(self, r: AdeType, n: int | None, p: int, partition: Partition | None = None,
                 collect: bool = False, want: Iterable[int] | None = None, first_only: bool = False,
                 node_budget: int | None = None, time_budget: float | None = None,
                 fixed: Iterable[int] = ()):
        self.r = r
        self.n = n if n and n > 1 else None
        self.p = p
        self.fqm = fqm_of_type(r, self.n)
        self.primes = self.fqm.primes()
        if p not in self.primes:
            raise ValueError(f"{p} does not divide the glue group order")
        self.partition = partition or Partition.default(self.primes, p)
        if p not in self.partition.a or set(self.partition.a) & set(self.partition.b) \
                or set(self.partition.a) | set(self.partition.b) != set(self.primes):
            raise ValueError("invalid partition")
        self.collect = collect
        feas = feasible_sigmas(self.fqm, p)
        self.want = sorted(set(feas) & set(want)) if want is not None else feas
        self.first_only = first_only
        self.budget = _Budget(node_budget, time_budget)
        self.fixed = tuple(fixed)
        self.telemetry = {"nodes": 0, "canon_calls": 0, "seconds": 0.0, "searches": 0}
        self._full_space = None

    # -- plumbing ------------------------------------------------------------

    def _run(self, space: GlueSpace, caps, visit) -> bool:
        search = self.budget.search(space, caps)
        complete = True
        try:
            search.run(visit)
        except BudgetExceeded:
            complete = False
        self.budget.charge(search)
        st = search.stats
        self.telemetry["nodes"] += st.nodes
        self.telemetry["canon_calls"] += st.canon_calls
        self.telemetry["searches"] += 1
        return complete

    def _root_free(self, parts: dict[int, PrimeSubgroup]) -> bool:
        if self._full_space is None:
            self._full_space = GlueSpace(self.r, self.n, fixed=self.fixed)
        space = self._full_space
        full = {l: PrimeSubgroup(space.parts[l], parts[l].rows) if l in parts
                else PrimeSubgroup(space.parts[l], []) for l in space.primes}
        arr = _combine(space, full)
        return not space.bad_rows(arr, True, True).any()

    # -- B side --------------------------------------------------------------

    def _b_block(self, block: tuple[int, ...], coupled: bool) -> tuple[list[dict[int, PrimeSubgroup]], bool]:
        space = GlueSpace(self.r, self.n, block, fixed=self.fixed)
        caps = _lagrangian_caps(space, block)
        if caps is None:
            return [], True
        out: list[dict[int, PrimeSubgroup]] = []
        keep_all = coupled or self.collect

        def visit(node: Node) -> bool:
            if all(_is_lagrangian(node, space, l) for l in block):
                out.append({l: node.parts[l] for l in block})
                return not keep_all
            return False

        complete = self._run(space, caps, visit)
        if out and not keep_all:
            complete = True
        return out, complete

    # -- main ----------------------------------------------------------------

    def run(self) -> SplitOutcome:
        t0 = time.monotonic()
        found: dict[int, list[dict[int, PrimeSubgroup]]] = {}
        a_primes, b_primes = self.partition.a, self.partition.b
        complete = True
        if not self.want:
            return self._finish(found, True, t0)
        blocks = coupled_blocks(self.r, self.primes)
        a_set = set(a_primes)
        # split B into its own coupling blocks; note which touch A
        b_blocks = coupled_blocks(self.r, b_primes) if b_primes else []
        b_lists = []
        for blk in b_blocks:
            touches_a = any(set(blk) & set(big) and a_set & set(big) for big in blocks)
            lst, ok = self._b_block(blk, touches_a)
            complete = complete and ok
            if not lst:
                return self._finish(found, ok, t0)
            b_lists.append((blk, touches_a, lst))
        # A side
        space = GlueSpace(self.r, self.n, a_primes, fixed=self.fixed)
        part_p = space.parts[self.p]
        caps = _lagrangian_caps(space, [l for l in a_primes if l != self.p])
        if caps is None:
            return self._finish(found, complete, t0)
        total_p = 1
        for m in part_p.orders:
            total_p *= m
        caps[self.p] = math.isqrt(total_p // self.p ** (2 * min(self.want)))
        others = [l for l in a_primes if l != self.p]
        fixed_b = {}
        coupled_lists = []
        for blk, touches, lst in b_lists:
            if touches:
                coupled_lists.append(lst)
            else:
                # any member works; when collecting keep them all
                fixed_b[blk] = lst
        want = set(self.want)

        def visit(node: Node) -> bool:
            sigma = sigma_of(node, part_p, self.p)
            if sigma is None or sigma not in want:
                return False
            if not all(_is_lagrangian(node, space, l) for l in others):
                return False
            if sigma in found and not self.collect:
                return False
            a_parts = {l: node.parts[l] for l in a_primes}
            combos = itertools.product(*coupled_lists) if coupled_lists else [()]
            for combo in combos:
                parts = dict(a_parts)
                for piece in combo:
                    parts.update(piece)
                if coupled_lists and not self._root_free(parts):
                    continue
                if self.collect:
                    for rest in itertools.product(*fixed_b.values()):
                        full = dict(parts)
                        for piece in rest:
                            full.update(piece)
                        found.setdefault(sigma, []).append(full)
                else:
                    for lst in fixed_b.values():
                        parts.update(lst[0])
                    found[sigma] = [parts]
                    break
            if self.collect:
                return False
            if self.first_only and found:
                return True
            return want <= set(found)

        ok = self._run(space, caps, visit)
        done_early = not self.collect and (want <= set(found) or (self.first_only and found))
        complete = complete and (ok or done_early)
        return self._finish(found, complete, t0)

    def _finish(self, found, complete, t0) -> SplitOutcome:
        self.telemetry["seconds"] = round(time.monotonic() - t0, 3)
        return SplitOutcome(found, complete, dict(self.telemetry))

    def generators(self, parts: dict[int, PrimeSubgroup]) -> list[tuple[int, ...]]:
        """Generators of a combined witness as elements of the full module."""
        out = []
        for l, s in sorted(parts.items()):
            part = self.fqm.primary(l)
            for t in s.generators():
                out.append(part.embed(t))
        return out


# ---------------------------------------------------------------------------
# Algorithms


def algorithm_II(r: AdeType, n: int, p: int, partition: Partition | None = None,
                 node_budget: int | None = None, time_budget: float | None = None,
                 want: Iterable[int] | None = None, first_only: bool = False) -> RdpResult:
    """Realizable sigmas of [R, n, p] through an A/B split (default A = {p}).

    With ``first_only`` the search stops at the first witness; the result then
    has status ``"exists"`` and its sigma list may be partial.
    """
    cand = RdpCandidate(r, n, p)
    f = fqm_of_type(r, n)
    if p not in f.primes():
        return RdpResult(cand, [], status="complete")
    search = SplitSearch(r, n, p, partition, want=want, first_only=first_only,
                         node_budget=node_budget, time_budget=time_budget)
    out = search.run()
    wit = {s: search.generators(v[0]) for s, v in out.found.items()}
    if first_only and wit:
        status = "exists"
    else:
        status = "complete" if out.complete else "undecided"
    return RdpResult(cand, sorted(wit), wit, status, out.telemetry)


def algorithm_I(r: AdeType, n: int, ps: Iterable[int] | None = None,
                node_budget: int | None = None, time_budget: float | None = None) -> dict[int, RdpResult]:
    """Realizable sigmas of (R, n) for every p, from one search over the whole group."""
    f = fqm_of_type(r, n)
    primes = f.primes()
    if ps is None:
        ps = sorted(p for nn, p in np_set(r) if nn == n)
    ps = [p for p in ps if p in primes]
    results = {p: RdpResult(RdpCandidate(r, n, p), []) for p in ps}
    if not ps:
        return results
    space = GlueSpace(r, n, primes)
    totals = {}
    for l in primes:
        t = 1
        for m in space.parts[l].orders:
            t *= m
        totals[l] = t
    want = {p: set(feasible_sigmas(f, p)) for p in ps}
    found: dict[int, dict[int, list]] = {p: {} for p in ps}

    def visit(node: Node) -> bool:
        for p in ps:
            if not want[p] or set(found[p]) >= want[p]:
                continue
            if any(node.parts[l].order ** 2 != totals[l] for l in primes if l != p):
                continue
            sigma = sigma_of(node, space.parts[p], p)
            if sigma is not None and sigma in want[p] and sigma not in found[p]:
                gens = []
                for l in primes:
                    part = f.primary(l)
                    gens += [part.embed(t) for t in node.parts[l].generators()]
                found[p][sigma] = gens
        return all(set(found[p]) >= want[p] for p in ps)

    search = IsotropicSearch(space, node_budget=node_budget, time_budget=time_budget)
    complete = True
    t0 = time.monotonic()
    try:
        search.run(visit)
    except BudgetExceeded:
        complete = False
    if not complete and all(set(found[p]) >= want[p] for p in ps):
        complete = True
    tele = {"nodes": search.stats.nodes, "canon_calls": search.stats.canon_calls,
            "seconds": round(time.monotonic() - t0, 3), "searches": 1}
    for p in ps:
        res = results[p]
        res.sigmas = sorted(found[p])
        res.witnesses = found[p]
        res.status = "complete" if complete or set(found[p]) >= want[p] else "undecided"
        res.telemetry = tele
    return results


def classify_candidate(c: RdpCandidate, node_budget: int | None = None,
                       time_budget: float | None = None, first_only: bool = False) -> RdpResult:
    """Classify one candidate; pruned candidates are decided without search."""
    why = pruning_reason(c)
    if why is not None:
        return RdpResult(c, [], status="complete", telemetry={"pruned": why})
    return algorithm_II(c.r, c.n, c.p, node_budget=node_budget, time_budget=time_budget,
                        first_only=first_only)


def verify_witnesses(res: RdpResult) -> bool:
    """Re-check every stored witness from scratch."""
    c = res.candidate
    for s in res.sigmas:
        if s not in res.witnesses:
            return False
        if not check_conditions(c.r, c.n, c.p, s, res.witnesses[s]).ok:
            return False
    return True


def candidates_for(p: int | None = None, n: int | None = None,
                   predicate: Callable[[RdpCandidate], bool] | None = None) -> list[RdpCandidate]:
    """Unpruned candidates, optionally filtered."""
    triples, _ = build_candidates()
    out = []
    for c in triples:
        if p is not None and c.p != p:
            continue
        if n is not None and c.n != n:
            continue
        if predicate is not None and not predicate(c):
            continue
        if pruning_reason(c) is None:
            out.append(c)
    return out


def script_e_candidates() -> dict[AdeType, list[RdpCandidate]]:
    """Rank-20 types R with (R + A_1, 2, p) surviving pruning, keyed by R."""
    out: dict[AdeType, list[RdpCandidate]] = {}
    for c in candidates_for(n=2, predicate=lambda c: c.r.count(("A", 1)) > 0):
        syms = list(c.r.symbols)
        syms.remove(("A", 1))
        out.setdefault(AdeType.of(syms), []).append(c)
    return out
