"""Extremal elliptic and quasi-elliptic fibrations on supersingular K3 surfaces.

For a rank-20 type R the fibrations come from the RDP data of ``(R + A_1, 2)``.
In ``Q(R + A_1, 2)`` take ``h = e`` (the generator of ``<2>``) and ``z = alpha``
(the root of the extra A_1). An overlattice ``Lambda_S`` carries a fibration
with trivial lattice ``U + Q(R)`` exactly when ``f = (h - z) / 2`` lies in it,
i.e. when the glue class ``(0, 1, 1)`` belongs to S. Such an S is
``S_0 + <(0, 1, 1)>`` for an isotropic ``S_0`` in ``G_R``, and

* ``S^perp / S`` is isometric to ``S_0^perp / S_0`` (in ``G_R``);
* the new roots of ``Lambda_S`` orthogonal to h are those of ``S_0``;
* ``U^perp`` is the overlattice of ``Q(R)`` defined by ``S_0``, so the
  Mordell-Weil group ``U^perp / Q(R)`` is isomorphic to ``S_0``.

So the search runs over root-free isotropic subgroups of ``G_R`` with the same
per-sigma tests as the RDP search, and every reported row is re-derived on the
explicit lattice: the overlattice is built, ``U^perp`` is computed as an
integer kernel and the quotient by ``Q(R)`` is read off a Smith normal form.
The symmetry group is that of ``Q(R)`` alone; the extra A_1 and ``<2>`` are
never moved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .adelattice import AdeType, format_ade, gram_of, rho_of_glue, root_count_of
from .classify_rdp import (
    RdpResult,
    SplitSearch,
    check_conditions,
)
from .discform import PrimeSubgroup, fqm_of_type, is_p_elementary, overlattice, quotient_structure, to_classes
from .exactlin import integer_kernel, matmul, transpose

A1 = ("A", 1)


@dataclass
class EllipticResult:
    """One row: an extremal fibration type in characteristic p.

    Attributes:
        r: Rank-20 type of the reducible fibres.
        p: Characteristic.
        sigma: Artin invariant.
        mw: Invariant factors of the Mordell-Weil group (empty when trivial).
        quasi: Whether the fibration is quasi-elliptic.
        witness: Generators of ``S_0`` in ``fqm_of_type(R)``.
    """

    r: AdeType
    p: int
    sigma: int
    mw: list[int]
    quasi: bool
    witness: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def torsion_rank(self) -> int:
        return len(self.mw)

    def mw_string(self) -> str:
        return "0" if not self.mw else "[" + ", ".join(map(str, self.mw)) + "]"

    def to_json(self) -> dict:
        return {"R": format_ade(self.r), "p": self.p, "sigma": self.sigma, "mw": self.mw,
                "quasi": self.quasi, "witness": [list(g) for g in self.witness]}

    @classmethod
    def from_json(cls, d: dict) -> "EllipticResult":
        from .adelattice import parse_ade
        return cls(parse_ade(d["R"]), d["p"], d["sigma"], list(d["mw"]), d["quasi"],
                   [tuple(g) for g in d["witness"]])


# ---------------------------------------------------------------------------
# The list of rank-20 types


def script_e(results: Iterable[RdpResult]) -> tuple[list[AdeType], list[AdeType]]:
    """Rank-20 types R with (R + A_1, 2, sigma) realizable for some sigma and p.

    Args:
        results: RDP results for n = 2 candidates containing A_1.

    Returns:
        (members, undecided): ``undecided`` lists types with no witness yet
        and at least one candidate whose search did not finish.
    """
    realizable: set[AdeType] = set()
    seen: dict[AdeType, bool] = {}
    for res in results:
        c = res.candidate
        if c.n != 2 or c.r.count(A1) == 0:
            continue
        r20 = drop_a1(c.r)
        if res.sigmas:
            realizable.add(r20)
        seen[r20] = seen.get(r20, True) and (res.status == "complete" or bool(res.sigmas))
    undecided = sorted((r for r, ok in seen.items() if not ok and r not in realizable), key=lambda t: t.symbols)
    return sorted(realizable, key=lambda t: t.symbols), undecided


def drop_a1(r: AdeType) -> AdeType:
    syms = list(r.symbols)
    syms.remove(A1)
    return AdeType.of(syms)


def add_a1(r: AdeType) -> AdeType:
    return AdeType.of(list(r.symbols) + [A1])


# ---------------------------------------------------------------------------
# Mordell-Weil groups


def merge_invariants(per_prime: Iterable[Sequence[int]]) -> list[int]:
    """Invariant factors of a direct sum of primary groups, ascending."""
    cols = [sorted(x, reverse=True) for x in per_prime if x]
    depth = max((len(c) for c in cols), default=0)
    out = []
    for i in range(depth):
        v = 1
        for c in cols:
            if i < len(c):
                v *= c[i]
        out.append(v)
    return sorted(out)


def _lift_to_r_plus_a1(r: AdeType, gens: Sequence[Sequence[int]]) -> tuple[AdeType, list[tuple[int, ...]]]:
    """Embed S_0 into G of (R + A_1, 2) and add the class of f.

    The extra A_1 sorts last among the components, so its glue coordinate
    follows those of R and the <2> coordinate comes after it.
    """
    r1 = add_a1(r)
    f1 = fqm_of_type(r1, 2)
    k = fqm_of_type(r).ngens
    if f1.ngens != k + 2:
        raise AssertionError("unexpected generator layout")
    out = [tuple(g) + (0, 0) for g in gens]
    out.append((0,) * k + (1, 1))
    return r1, out


def explicit_mordell_weil(r: AdeType, gens: Sequence[Sequence[int]]) -> list[int]:
    """Mordell-Weil group of the fibration attached to S_0 = <gens>, from the lattice.

    Builds ``Lambda_S`` for ``S = S_0 + <(0, 1, 1)>``, checks that ``f`` and
    ``z`` span a copy of U, takes ``U^perp`` as an integer kernel and returns the
    invariant factors of ``U^perp / Q(R)``. Raises if ``U^perp`` has roots
    outside ``Q(R)`` or the quotient is infinite.
    """
    r1, big = _lift_to_r_plus_a1(r, gens)
    f1 = fqm_of_type(r1, 2)
    lat = gram_of(r1, 2)
    dim = len(lat.gram)
    over = overlattice(lat, f1, big)
    h = [Fraction(0)] * dim
    h[dim - 1] = Fraction(1)
    z = [Fraction(0)] * dim
    z[dim - 2] = Fraction(1)
    fvec = [(a - b) / 2 for a, b in zip(h, z)]
    if not over.contains(fvec) or not over.contains(z):
        raise AssertionError("f or z is not in the overlattice")

    def ip(x, y):
        return sum(x[i] * lat.gram[i][j] * y[j] for i in range(dim) for j in range(dim) if x[i] and y[j])

    if [[ip(fvec, fvec), ip(fvec, z)], [ip(z, fvec), ip(z, z)]] != [[0, 1], [1, -2]]:
        raise AssertionError("f, z do not span U")
    pairing = [[ip(b, fvec), ip(b, z)] for b in over.basis]
    if any(x.denominator != 1 for row in pairing for x in row):
        raise AssertionError("non-integral pairing")
    ker = integer_kernel(transpose([[int(x) for x in row] for row in pairing]))
    uperp = matmul(ker, over.basis)
    k = r.rank
    qr = [[Fraction(int(i == j)) for j in range(dim)] for i in range(k)]
    inv, free = quotient_structure(uperp, qr)
    if free:
        raise AssertionError("Q(R) has smaller rank than U^perp")
    # roots of U^perp: it is the overlattice of Q(R) by S_0, so compare counts
    f0 = fqm_of_type(r)
    from .discform import Subgroup
    s0 = Subgroup.generated(f0, gens)
    glue = [to_classes(r, f0, x)[: len(r.symbols)] for x in s0.elements()]
    if rho_of_glue(r, glue) != root_count_of(r):
        raise AssertionError("U^perp has roots outside Q(R)")
    order = 1
    for d in inv:
        order *= d
    if order != s0.order:
        raise AssertionError("U^perp is not the overlattice defined by S_0")
    return inv


# ---------------------------------------------------------------------------
# Classification


def quasi_elliptic_test(r: AdeType, p: int) -> bool:
    """An extremal fibration in characteristic 2 or 3 is quasi-elliptic iff Q(R) is p-elementary."""
    if p not in (2, 3):
        raise ValueError("quasi-elliptic fibrations exist only in characteristic 2 and 3")
    return is_p_elementary(gram_of(r).gram, p)


def elliptic_classify(r: AdeType, p: int, node_budget: int | None = None,
                      time_budget: float | None = None, verify: bool = True) -> tuple[list[EllipticResult], bool]:
    """All (sigma, MW) rows for a rank-20 type in characteristic p.

    Returns:
        (rows, complete): rows sorted by sigma then MW; ``complete`` is False
        when a budget ran out.
    """
    if r.rank != 20:
        raise ValueError("rank must be 20")
    f0 = fqm_of_type(r)
    if p not in f0.primes():
        return [], True
    search = SplitSearch(r, None, p, collect=True, node_budget=node_budget, time_budget=time_budget)
    out = search.run()
    quasi = quasi_elliptic_test(r, p) if p in (2, 3) else False
    rows: dict[tuple[int, tuple[int, ...]], EllipticResult] = {}
    for sigma, lst in sorted(out.found.items()):
        for parts in lst:
            mw = merge_invariants(s.invariants() for s in parts.values())
            key = (sigma, tuple(mw))
            if key not in rows:
                rows[key] = EllipticResult(r, p, sigma, mw, quasi, search.generators(parts))
    result = [rows[k] for k in sorted(rows)]
    if verify:
        for row in result:
            verify_row(row)
    return result, out.complete


def verify_row(row: EllipticResult) -> None:
    """Re-derive a row from its witness on the explicit lattice; raises on mismatch."""
    r1, big = _lift_to_r_plus_a1(row.r, row.witness)
    rep = check_conditions(r1, 2, row.p, row.sigma, big)
    if not rep.ok:
        raise AssertionError(f"witness fails the realizability conditions: {rep}")
    mw = explicit_mordell_weil(row.r, row.witness)
    if mw != row.mw:
        raise AssertionError(f"Mordell-Weil mismatch {mw} != {row.mw}")
    if row.quasi and not torsion_rank_check(row):
        raise AssertionError("torsion rank formula fails")


# ---------------------------------------------------------------------------
# Fibre types


_QUASI = {
    2: {"A": {1: "III"}, "E": {7: "III*", 8: "II*"}},
    3: {"A": {2: "IV"}, "E": {6: "IV*", 8: "II*"}},
}


def kodaira_annotate(r: AdeType, p: int, quasi: bool) -> list[str]:
    """Kodaira fibre type(s) per component; alternatives joined by '|'."""
    out = []
    for t, k in r.symbols:
        if quasi:
            if p == 2 and t == "D" and k % 2 == 0:
                out.append(f"I*{k - 4}")
                continue
            name = _QUASI.get(p, {}).get(t, {}).get(k)
            if name is None:
                raise ValueError(f"{t}{k} cannot occur in a quasi-elliptic fibration in characteristic {p}")
            out.append(name)
        elif t == "A":
            out.append({1: "I2|III", 2: "I3|IV"}.get(k, f"I{k + 1}"))
        elif t == "D":
            out.append(f"I*{k - 4}")
        else:
            out.append({6: "IV*", 7: "III*", 8: "II*"}[k])
    return out


def torsion_rank_check(row: EllipticResult) -> bool:
    """For quasi-elliptic rows: MW is p-elementary and 2(sigma + r) matches the fibre count."""
    if not row.quasi:
        raise ValueError("only defined for quasi-elliptic rows")
    if any(d != row.p for d in row.mw):
        return False
    types = kodaira_annotate(row.r, row.p, True)
    if row.p == 2:
        rhs = sum(2 for t in types if t.startswith("I*")) + types.count("III") + types.count("III*")
    else:
        rhs = types.count("IV") + types.count("IV*")
    return 2 * (row.sigma + row.torsion_rank) == rhs
