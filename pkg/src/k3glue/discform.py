"""Finite quadratic modules, their subgroups, and overlattices.

A finite quadratic module (FQM) is stored on generators of a decomposition
``G = Z/m_1 + ... + Z/m_k`` with the values ``q(e_i)`` in ``Q/2Z`` and
``b(e_i, e_j)`` in ``Q/Z``. Elements are tuples of residues.

Subgroups are kept per prime: the ``l``-primary part of G is embedded in
``(Z/l^E)^k`` by scaling coordinate ``j`` by ``l^E / m_j`` and the subgroup is
stored as the Howell form of its image, which is canonical.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import isqrt
from typing import Iterable, Sequence

from .adelattice import AdeType, GramLattice, component_glue, gram_of, ordp, prime_factors
from .exactlin import (
    IntMatrix,
    det,
    hermite_normal_form,
    howell_form,
    howell_reduce,
    inverse_rational,
    kernel_mod,
    matmul,
    smith_normal_form,
    solve_rational,
    transpose,
)

Element = tuple[int, ...]


@dataclass(frozen=True)
class FiniteQuadraticModule:
    """A finite quadratic module on explicit cyclic generators.

    Attributes:
        orders: Orders ``m_i`` of the generators (all >= 2).
        q: ``q(e_i)`` reduced into [0, 2).
        b: ``b(e_i, e_j)`` reduced into [0, 1); ``b[i][i] = q[i] mod 1``.
        lifts: Optional rational vectors lifting the generators to the dual of
            an ambient lattice, in that lattice's coordinates.
        labels: Optional tag per generator (the component it belongs to).
    """

    orders: tuple[int, ...]
    q: tuple[Fraction, ...]
    b: tuple[tuple[Fraction, ...], ...]
    lifts: tuple[tuple[Fraction, ...], ...] | None = None
    labels: tuple[int, ...] | None = None

    @property
    def ngens(self) -> int:
        return len(self.orders)

    @property
    def order(self) -> int:
        out = 1
        for m in self.orders:
            out *= m
        return out

    def zero(self) -> Element:
        return (0,) * self.ngens

    def reduce(self, x: Sequence[int]) -> Element:
        return tuple(a % m for a, m in zip(x, self.orders))

    def add(self, x: Sequence[int], y: Sequence[int]) -> Element:
        return tuple((a + c) % m for a, c, m in zip(x, y, self.orders))

    def scale(self, c: int, x: Sequence[int]) -> Element:
        return tuple(c * a % m for a, m in zip(x, self.orders))

    def elements(self) -> Iterable[Element]:
        return itertools.product(*(range(m) for m in self.orders))

    def q_value(self, x: Sequence[int]) -> Fraction:
        """q(x) in [0, 2)."""
        k = self.ngens
        s = Fraction(0)
        for i in range(k):
            if x[i]:
                s += x[i] * x[i] * self.q[i]
                for j in range(i + 1, k):
                    if x[j]:
                        s += 2 * x[i] * x[j] * self.b[i][j]
        return s % 2

    def b_value(self, x: Sequence[int], y: Sequence[int]) -> Fraction:
        """b(x, y) in [0, 1)."""
        s = Fraction(0)
        for i, a in enumerate(x):
            if a:
                row = self.b[i]
                for j, c in enumerate(y):
                    if c:
                        s += a * c * row[j]
        return s % 1

    def element_order(self, x: Sequence[int]) -> int:
        out = 1
        for a, m in zip(x, self.orders):
            o = m // _gcd(a, m)
            out = out * o // _gcd(out, o)
        return out

    def is_nondegenerate(self) -> bool:
        for x in self.elements():
            if any(x) and all(self.b_value(x, self.unit(i)) == 0 for i in range(self.ngens)):
                return False
        return True

    def unit(self, i: int) -> Element:
        return tuple(int(j == i) for j in range(self.ngens))

    def direct_sum(self, other: "FiniteQuadraticModule") -> "FiniteQuadraticModule":
        k1, k2 = self.ngens, other.ngens
        b = [[Fraction(0)] * (k1 + k2) for _ in range(k1 + k2)]
        for i in range(k1):
            for j in range(k1):
                b[i][j] = self.b[i][j]
        for i in range(k2):
            for j in range(k2):
                b[k1 + i][k1 + j] = other.b[i][j]
        lifts = None
        if self.lifts is not None and other.lifts is not None:
            d1 = len(self.lifts[0]) if self.lifts else 0
            d2 = len(other.lifts[0]) if other.lifts else 0
            z1 = (Fraction(0),) * d1
            z2 = (Fraction(0),) * d2
            lifts = tuple(v + z2 for v in self.lifts) + tuple(z1 + v for v in other.lifts)
        labels = None
        if self.labels is not None and other.labels is not None:
            shift = max(self.labels, default=-1) + 1
            labels = self.labels + tuple(x + shift for x in other.labels)
        return FiniteQuadraticModule(self.orders + other.orders, self.q + other.q,
                                     tuple(map(tuple, b)), lifts, labels)

    # -- primary parts ------------------------------------------------------

    def primes(self) -> list[int]:
        return prime_factors(self.order) if self.order > 1 else []

    @cached_property
    def _parts(self) -> dict:
        return {}

    def primary(self, l: int) -> "PrimaryPart":
        cache = self._parts
        if l not in cache:
            cache[l] = PrimaryPart(self, l)
        return cache[l]


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return abs(a)


class PrimaryPart:
    """The l-primary part of an FQM with its own coordinates.

    Coordinate ``t`` of the part corresponds to generator ``src[t]`` of the
    parent, scaled by ``mult[t] = m / l^e``. The part has orders ``l^e``.
    """

    def __init__(self, parent: FiniteQuadraticModule, l: int):
        self.parent = parent
        self.l = l
        src, mult, orders = [], [], []
        for j, m in enumerate(parent.orders):
            e = 0
            mm = m
            while mm % l == 0:
                mm //= l
                e += 1
            if e:
                src.append(j)
                mult.append(m // l ** e)
                orders.append(l ** e)
        self.src = tuple(src)
        self.mult = tuple(mult)
        self.orders = tuple(orders)
        self.k = len(orders)
        self.modulus = max(orders, default=1)
        self.scale = tuple(self.modulus // m for m in orders)
        # idempotent per coordinate: 1 mod l^e, 0 mod m / l^e
        self._idem = []
        for j, m, lm in zip(src, mult, orders):
            full = parent.orders[j]
            # solve x = 1 mod lm, x = 0 mod m
            x = m * pow(m, -1, lm) % full if lm > 1 else 0
            self._idem.append(x)
        n = self.modulus
        self.fqm = FiniteQuadraticModule(
            self.orders,
            tuple((c * c * parent.q[j]) % 2 for j, c in zip(src, mult)),
            tuple(tuple((ci * cj * parent.b[i][j]) % 1 for j, cj in zip(src, mult))
                  for i, ci in zip(src, mult)),
            None,
            tuple(parent.labels[j] for j in src) if parent.labels else None,
        )
        # integer forms scaled by the modulus: b(e_i, e_j) * n mod n
        self.bint = [[int(self.fqm.b[i][j] * n) % n for j in range(self.k)] for i in range(self.k)]

    def embed(self, t: Sequence[int]) -> Element:
        """Element of the parent with l-part ``t`` and other parts zero."""
        out = [0] * self.parent.ngens
        for a, j, c in zip(t, self.src, self.mult):
            out[j] = (out[j] + a * c) % self.parent.orders[j]
        return tuple(out)

    def project(self, x: Sequence[int]) -> Element:
        """l-part of a parent element, in the part's coordinates."""
        out = []
        for j, c, e, lm in zip(self.src, self.mult, self._idem, self.orders):
            full = self.parent.orders[j]
            y = x[j] * e % full
            out.append((y // c) % lm)
        return tuple(out)

    def to_scaled(self, t: Sequence[int]) -> list[int]:
        return [a * s % self.modulus for a, s in zip(t, self.scale)]

    def from_scaled(self, y: Sequence[int]) -> Element:
        return tuple((a // s) % m for a, s, m in zip(y, self.scale, self.orders))

    def pairing_row(self, t: Sequence[int]) -> list[int]:
        """Integers r_j with b(e_j, t) = r_j / modulus mod 1."""
        n = self.modulus
        return [sum(self.bint[j][i] * a for i, a in enumerate(t)) % n for j in range(self.k)]


class PrimeSubgroup:
    """A subgroup of one primary part, stored as a Howell form.

    Attributes:
        part: The primary part it lives in.
        rows: Howell form (scaled coordinates).
    """

    __slots__ = ("part", "rows", "_elements")

    def __init__(self, part: PrimaryPart, rows: IntMatrix):
        self.part = part
        self.rows = rows
        self._elements = None

    @classmethod
    def generated(cls, part: PrimaryPart, gens: Iterable[Sequence[int]]) -> "PrimeSubgroup":
        scaled = [part.to_scaled(g) for g in gens]
        scaled = [r for r in scaled if any(r)]
        rows = howell_form(scaled, part.modulus) if scaled and part.k else []
        return cls(part, rows)

    def key(self) -> tuple:
        return tuple(map(tuple, self.rows))

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeSubgroup) and self.part is other.part and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    @property
    def order(self) -> int:
        n = self.part.modulus
        out = 1
        for row in self.rows:
            p = next(x for x in row if x)
            out *= n // p
        return out

    def generators(self) -> list[Element]:
        return [self.part.from_scaled(r) for r in self.rows]

    def contains(self, t: Sequence[int]) -> bool:
        y = self.part.to_scaled(t)
        return not any(howell_reduce(self.rows, y, self.part.modulus)) if self.rows else not any(y)

    def reduce(self, t: Sequence[int]) -> Element:
        """Canonical representative of the coset ``t + S``."""
        y = self.part.to_scaled(t)
        if self.rows:
            y = howell_reduce(self.rows, y, self.part.modulus)
        return self.part.from_scaled(y)

    def elements(self) -> list[Element]:
        if self._elements is None:
            n = self.part.modulus
            pts = [tuple([0] * self.part.k)]
            for row in self.rows:
                p = next(x for x in row if x)
                mult = [tuple(c * x % n for x in row) for c in range(n // p)]
                pts = [tuple((a + b) % n for a, b in zip(pt, m)) for pt in pts for m in mult]
            self._elements = [self.part.from_scaled(y) for y in pts]
        return self._elements

    def extend(self, gens: Iterable[Sequence[int]]) -> "PrimeSubgroup":
        return PrimeSubgroup.generated(self.part, self.generators() + list(gens))

    def orthogonal(self) -> "PrimeSubgroup":
        """Orthogonal complement inside the primary part."""
        part = self.part
        if part.k == 0:
            return self
        gens = self.generators()
        if not gens:
            return PrimeSubgroup.generated(part, [part.fqm.unit(i) for i in range(part.k)])
        n = part.modulus
        # t in kernel iff sum_j t_j * b(e_j, s) = 0 for every generator s, where
        # t_j ranges over Z/n and only matters modulo the order of e_j
        a = [part.pairing_row(s) for s in gens]  # r x k
        m = transpose(a)  # k x r; left kernel of m over Z/n
        ker = kernel_mod(m, n)
        return PrimeSubgroup.generated(part, [tuple(x % o for x, o in zip(row, part.orders)) for row in ker])

    def is_isotropic(self) -> bool:
        f = self.part.fqm
        gens = self.generators()
        for i, g in enumerate(gens):
            if f.q_value(g) != 0:
                return False
            for h in gens[i + 1:]:
                if f.b_value(g, h) != 0:
                    return False
        return True

    def invariants(self) -> list[int]:
        """Invariant factors of the abstract group (each > 1), ascending."""
        return abelian_invariants(self.elements(), self.part.fqm)


def abelian_invariants(elements: Sequence[Element], f: FiniteQuadraticModule) -> list[int]:
    """Invariant factors of a finite abelian group given all its elements.

    Uses the counts of elements killed by each divisor of the exponent, which
    determine the group up to isomorphism.
    """
    orders = [f.element_order(x) for x in elements]
    out: list[int] = []
    for l in prime_factors(max(orders, default=1)):
        # number of elements whose order has l-part dividing l^i
        cnt = []
        i = 0
        lparts = [l ** ordp(o, l) for o in orders]
        while True:
            c = sum(1 for o in lparts if (l ** i) % o == 0)
            cnt.append(c)
            if c == len(orders):
                break
            i += 1
        # rank of l^{i-1}G / l^i G style counts: r_i = log_l(cnt[i]/cnt[i-1])
        logs = []
        for i in range(1, len(cnt)):
            r = 0
            x = cnt[i] // cnt[i - 1]
            while x > 1:
                x //= l
                r += 1
            logs.append(r)
        # logs[i-1] = number of cyclic factors of order >= l^i
        exps = []
        for i, r in enumerate(logs):
            nxt = logs[i + 1] if i + 1 < len(logs) else 0
            exps += [i + 1] * (r - nxt)
        out_l = sorted(l ** e for e in exps)
        out.append(out_l)
    # combine primary factors into invariant factors
    width = max((len(x) for x in out), default=0)
    inv = [1] * width
    for factors in out:
        pad = [1] * (width - len(factors)) + factors
        inv = [a * b for a, b in zip(inv, pad)]
    return [x for x in inv if x > 1]


@dataclass
class Subgroup:
    """A subgroup of an FQM given by its primary pieces.

    Attributes:
        fqm: Ambient module.
        parts: Map prime -> PrimeSubgroup (primes with trivial piece may be absent).
    """

    fqm: FiniteQuadraticModule
    parts: dict[int, PrimeSubgroup] = field(default_factory=dict)

    @classmethod
    def generated(cls, f: FiniteQuadraticModule, gens: Iterable[Sequence[int]]) -> "Subgroup":
        gens = [f.reduce(g) for g in gens]
        parts = {}
        for l in f.primes():
            part = f.primary(l)
            parts[l] = PrimeSubgroup.generated(part, [part.project(g) for g in gens])
        return cls(f, parts)

    def part(self, l: int) -> PrimeSubgroup:
        if l not in self.parts:
            self.parts[l] = PrimeSubgroup(self.fqm.primary(l), [])
        return self.parts[l]

    @property
    def order(self) -> int:
        out = 1
        for s in self.parts.values():
            out *= s.order
        return out

    def key(self) -> tuple:
        return tuple((l, self.parts[l].key()) for l in sorted(self.parts) if self.parts[l].rows)

    def elements(self) -> list[Element]:
        out = [self.fqm.zero()]
        for l in sorted(self.parts):
            s = self.parts[l]
            if not s.rows:
                continue
            emb = [s.part.embed(t) for t in s.elements()]
            out = [self.fqm.add(x, y) for x in out for y in emb]
        return out

    def generators(self) -> list[Element]:
        out = []
        for l in sorted(self.parts):
            s = self.parts[l]
            out += [s.part.embed(t) for t in s.generators()]
        return out

    def contains(self, x: Sequence[int]) -> bool:
        for l in self.fqm.primes():
            part = self.fqm.primary(l)
            if not self.part(l).contains(part.project(x)):
                return False
        return True

    def is_isotropic(self) -> bool:
        return all(s.is_isotropic() for s in self.parts.values())

    def orthogonal(self) -> "Subgroup":
        return Subgroup(self.fqm, {l: self.part(l).orthogonal() for l in self.fqm.primes()})

    def invariants(self) -> list[int]:
        return abelian_invariants(self.elements(), self.fqm)


# ---------------------------------------------------------------------------
# Constructions


def discriminant_form(lattice: GramLattice | Sequence[Sequence[int]]) -> FiniteQuadraticModule:
    """Discriminant form of an even nondegenerate lattice via Smith normal form.

    Generator lifts are given in the lattice's own coordinates.
    """
    gram = lattice.gram if isinstance(lattice, GramLattice) else [list(r) for r in lattice]
    n = len(gram)
    snf = smith_normal_form(gram)
    if any(d == 0 for d in snf.diag):
        raise ValueError("degenerate lattice")
    vinv = inverse_rational(snf.right)
    minv = inverse_rational(gram)
    gens, orders = [], []
    for i, d in enumerate(snf.diag):
        if d > 1:
            c = vinv[i]  # dual-basis coordinates of the generator
            gens.append([sum(c[j] * minv[j][k] for j in range(n)) for k in range(n)])
            orders.append(d)
    return _fqm_from_lifts(gram, orders, gens)


def _fqm_from_lifts(gram, orders, lifts, labels=None) -> FiniteQuadraticModule:
    def ip(x, y):
        return sum(x[i] * gram[i][j] * y[j] for i in range(len(x)) for j in range(len(y)) if x[i] and y[j])

    k = len(orders)
    q = tuple(Fraction(ip(v, v)) % 2 for v in lifts)
    b = tuple(tuple(Fraction(ip(lifts[i], lifts[j])) % 1 for j in range(k)) for i in range(k))
    return FiniteQuadraticModule(tuple(orders), q, b,
                                 tuple(tuple(Fraction(x) for x in v) for v in lifts), labels)


def cyclic_form(n: int) -> FiniteQuadraticModule:
    """Discriminant form of the rank-one lattice <n>, generated by e/n."""
    return FiniteQuadraticModule((n,), (Fraction(1, n) % 2,), ((Fraction(1, n) % 1,),),
                                 ((Fraction(1, n),),), (0,))


def fqm_of_type(r: AdeType, n: int | None = None) -> FiniteQuadraticModule:
    """G_R (or G_R + G_n) with generators following the component conventions.

    A cyclic component contributes one generator (class 1). An even D_m
    contributes two generators, the classes v and s. The I(n) generator is
    e/n. Labels give the component index (the I(n) part gets ``len(symbols)``).
    Lifts live in the coordinates of ``gram_of(r, n)``.
    """
    gram = gram_of(r, n).gram
    dim = len(gram)
    orders, lifts, labels = [], [], []
    offset = 0
    for idx, sym in enumerate(r.symbols):
        glue = component_glue(sym)

        def place(vec):
            out = [Fraction(0)] * dim
            for i, x in enumerate(vec):
                out[offset + i] = x
            return out

        if glue.order > 1:
            if glue.kind == "v4":
                for cl in (1, 2):
                    orders.append(2)
                    lifts.append(place(glue.lifts[cl]))
                    labels.append(idx)
            else:
                orders.append(glue.order)
                lifts.append(place(glue.lifts[1]))
                labels.append(idx)
        offset += sym[1]
    if n is not None and n > 1:
        orders.append(n)
        v = [Fraction(0)] * dim
        v[dim - 1] = Fraction(1, n)
        lifts.append(v)
        labels.append(len(r.symbols))
    return _fqm_from_lifts(gram, orders, lifts, tuple(labels))


def to_classes(r: AdeType, f: FiniteQuadraticModule, x: Sequence[int]) -> tuple[int, ...]:
    """Per-component class numbers of an element of ``fqm_of_type(r, ...)``.

    The I(n) coordinate, when present, is appended as the last entry.
    """
    out = [0] * (len(r.symbols) + 1)
    seen_v4: dict[int, int] = {}
    for j, lab in enumerate(f.labels):
        if lab < len(r.symbols) and component_glue(r.symbols[lab]).kind == "v4":
            # first generator is v (=1), second is s (=2); XOR encoding
            pos = seen_v4.get(lab, 0)
            seen_v4[lab] = pos + 1
            if x[j] % 2:
                out[lab] ^= (1 if pos == 0 else 2)
        else:
            out[lab] = x[j]
    return tuple(out) if f.order and f.labels and max(f.labels) == len(r.symbols) else tuple(out[:-1])


# ---------------------------------------------------------------------------
# Overlattices


@dataclass
class Overlattice:
    """An overlattice of an integral lattice.

    Attributes:
        basis: Rational basis rows in the coordinates of the original lattice.
        gram: Integer Gram matrix of that basis.
        index: Index of the original lattice in the overlattice.
    """

    basis: list[list[Fraction]]
    gram: IntMatrix
    index: int

    def coordinates(self, v: Sequence) -> list[Fraction] | None:
        return solve_rational(self.basis, v)

    def contains(self, v: Sequence) -> bool:
        c = self.coordinates(v)
        return c is not None and all(x.denominator == 1 for x in c)


def overlattice(lattice: GramLattice, f: FiniteQuadraticModule, glue: Iterable[Sequence[int]]) -> Overlattice:
    """Overlattice of ``lattice`` generated by the lifts of the glue elements."""
    gram = lattice.gram
    n = len(gram)
    vecs = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for g in glue:
        v = [Fraction(0)] * n
        for a, lift in zip(g, f.lifts):
            if a:
                for i in range(n):
                    v[i] += a * lift[i]
        vecs.append(v)
    den = 1
    for v in vecs:
        for x in v:
            den = den * x.denominator // _gcd(den, x.denominator)
    h = hermite_normal_form([[int(x * den) for x in v] for v in vecs])
    basis = [[Fraction(x, den) for x in row] for row in h]
    g = matmul(matmul(basis, gram), transpose(basis))
    if any(x.denominator != 1 for row in g for x in row):
        raise ValueError("glue is not integral")
    gi = [[int(x) for x in row] for row in g]
    d = det(gi)
    if d == 0:
        raise ValueError("degenerate overlattice")
    ratio, rem = divmod(abs(det(lattice.gram)), abs(d))
    idx = isqrt(ratio)
    if rem or idx * idx != ratio:
        raise ValueError("determinant ratio is not a square")
    return Overlattice(basis, gi, idx)


def is_p_elementary(gram: Sequence[Sequence[int]], p: int) -> bool:
    """True when the discriminant group is annihilated by p."""
    inv = inverse_rational(gram)
    return all((p * x).denominator == 1 for row in inv for x in row)


def is_type_I(gram: Sequence[Sequence[int]]) -> bool:
    """True when the dual has only integer norms, i.e. q takes values in Z/2Z.

    For a 2-elementary lattice this is the diagonal test on the inverse Gram.
    """
    inv = inverse_rational(gram)
    n = len(inv)
    if not all((2 * x).denominator == 1 for row in inv for x in row):
        # not 2-elementary: test every generator of the discriminant group
        f = discriminant_form(gram)
        return all(x.denominator == 1 for x in f.q) and all((2 * x).denominator == 1 for row in f.b for x in row)
    return all(inv[i][i].denominator == 1 for i in range(n))


def quotient_structure(big: Sequence[Sequence], small: Sequence[Sequence]) -> tuple[list[int], int]:
    """Structure of the quotient of the lattice spanned by ``big`` by its sublattice ``small``.

    Both arguments are bases (rows, rational entries allowed) in a common
    ambient coordinate system; ``small`` must lie in the span of ``big``.

    Returns:
        (invariant factors > 1, free rank).
    """
    rows = []
    for v in small:
        c = solve_rational(big, v)
        if c is None or any(x.denominator != 1 for x in c):
            raise ValueError("sublattice is not contained in the lattice")
        rows.append([int(x) for x in c])
    k = len(big)
    if not rows:
        return [], k
    snf = smith_normal_form(rows)
    nz = [d for d in snf.diag if d]
    return [d for d in nz if d > 1], k - len(nz)
