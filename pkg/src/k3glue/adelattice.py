"""ADE root types, their root lattices and the glue (coset) data of their duals.

Conventions:
    * A root lattice ``Q(X)`` carries the negated Cartan matrix, so it is
      negative definite and even.
    * Dynkin labels: A is a chain; D_m is the chain 1..m-2 with nodes m-1 and
      m both attached to m-2; E_n uses the Bourbaki numbering (1-3-4-5-..-n
      with node 2 attached to 4).
    * The glue group ``G_X = Q(X)^v / Q(X)`` is indexed by a class number
      ``k``. For A_l, E_6, E_7 and odd D_m it is cyclic, generated by the class
      of the fundamental weight w_1 (A, E_6), w_7 (E_7) or w_{m-1} (odd D_m).
      For even D_m the four classes are encoded as 2-bit integers
      ``0, 1 = v, 2 = s, 3 = c`` with addition by XOR, where v is the class of
      w_1 and s, c those of w_{m-1}, w_m.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, gcd, isqrt
from typing import Iterable, Sequence

from .exactlin import IntMatrix, det, inverse_rational

Symbol = tuple[str, int]

_ORDER = {"E": 0, "D": 1, "A": 2}


def symbol_key(sym: Symbol) -> tuple[int, int]:
    """Sort key giving E8 > E7 > E6 > D_m (descending) > A_l (descending)."""
    return (_ORDER[sym[0]], -sym[1])


def valid_symbol(sym: Symbol) -> bool:
    t, k = sym
    return (t == "A" and k >= 1) or (t == "D" and k >= 4) or (t == "E" and k in (6, 7, 8))


@dataclass(frozen=True)
class AdeType:
    """A formal sum of indecomposable root types.

    Attributes:
        symbols: Components in canonical order, repeated by multiplicity.
    """

    symbols: tuple[Symbol, ...]

    @classmethod
    def of(cls, symbols: Iterable[Symbol]) -> "AdeType":
        syms = tuple(sorted(symbols, key=symbol_key))
        for s in syms:
            if not valid_symbol(s):
                raise ValueError(f"invalid root type {s}")
        return cls(syms)

    @property
    def rank(self) -> int:
        return sum(k for _, k in self.symbols)

    def counts(self) -> list[tuple[Symbol, int]]:
        out: list[tuple[Symbol, int]] = []
        for s in self.symbols:
            if out and out[-1][0] == s:
                out[-1] = (s, out[-1][1] + 1)
            else:
                out.append((s, 1))
        return out

    def count(self, sym: Symbol) -> int:
        return self.symbols.count(sym)

    def __add__(self, other: "AdeType") -> "AdeType":
        return AdeType.of(self.symbols + other.symbols)

    def __str__(self) -> str:
        return format_ade(self)

    def __repr__(self) -> str:
        return f"AdeType({format_ade(self)!r})"


_TERM = re.compile(r"^\s*(\d*)\s*([ADE])\s*_?\{?(\d+)\}?\s*$")


def parse_ade(text: str) -> AdeType:
    """Parse strings such as ``"E8+2D4+3A1"`` (whitespace tolerated).

    Raises:
        ValueError: on malformed input or an invalid component (e.g. D3).
    """
    text = text.strip()
    if not text:
        raise ValueError("empty root type")
    syms: list[Symbol] = []
    for term in text.split("+"):
        m = _TERM.match(term)
        if not m:
            raise ValueError(f"cannot parse term {term!r}")
        mult = int(m.group(1)) if m.group(1) else 1
        sym = (m.group(2), int(m.group(3)))
        if mult < 1 or not valid_symbol(sym):
            raise ValueError(f"invalid term {term!r}")
        syms.extend([sym] * mult)
    return AdeType.of(syms)


def format_ade(r: AdeType) -> str:
    parts = []
    for (t, k), mult in r.counts():
        parts.append(f"{mult if mult > 1 else ''}{t}{k}")
    return "+".join(parts)


def all_types(rank: int) -> list[AdeType]:
    """All ADE types of the given rank, in a deterministic order."""
    syms: list[Symbol] = [("E", 8), ("E", 7), ("E", 6)]
    syms += [("D", m) for m in range(rank, 3, -1)]
    syms += [("A", l) for l in range(rank, 0, -1)]
    syms = [s for s in syms if s[1] <= rank]
    out: list[AdeType] = []

    def rec(i: int, rem: int, cur: list[Symbol]) -> None:
        if rem == 0:
            out.append(AdeType(tuple(cur)))
            return
        if i == len(syms):
            return
        s = syms[i]
        for k in range(rem // s[1], -1, -1):
            rec(i + 1, rem - k * s[1], cur + [s] * k)

    rec(0, rank, [])
    return out


# ---------------------------------------------------------------------------
# Gram matrices


def dynkin_edges(sym: Symbol) -> list[tuple[int, int]]:
    t, k = sym
    if t == "A":
        return [(i, i + 1) for i in range(k - 1)]
    if t == "D":
        return [(i, i + 1) for i in range(k - 2)] + [(k - 3, k - 1)]
    # E_n, Bourbaki: 1-3, 3-4, 4-5, ..., and 2-4 (0-based below)
    return [(0, 2), (1, 3)] + [(i, i + 1) for i in range(2, k - 1)]


@lru_cache(maxsize=None)
def _gram(sym: Symbol) -> tuple[tuple[int, ...], ...]:
    k = sym[1]
    g = [[-2 if i == j else 0 for j in range(k)] for i in range(k)]
    for i, j in dynkin_edges(sym):
        g[i][j] = g[j][i] = 1
    return tuple(map(tuple, g))


def gram_of_indecomposable(sym: Symbol) -> IntMatrix:
    """Negated Cartan matrix of an indecomposable root type."""
    return [list(r) for r in _gram(sym)]


@dataclass
class GramLattice:
    """An integral lattice given by its Gram matrix.

    Attributes:
        gram: Symmetric integer matrix.
        signature: (positive, negative) index of inertia.
    """

    gram: IntMatrix
    signature: tuple[int, int]

    @property
    def rank(self) -> int:
        return len(self.gram)

    def det(self) -> int:
        return det(self.gram)

    def is_even(self) -> bool:
        return all(self.gram[i][i] % 2 == 0 for i in range(self.rank))


def block_diagonal(blocks: Sequence[Sequence[Sequence[int]]]) -> IntMatrix:
    n = sum(len(b) for b in blocks)
    out = [[0] * n for _ in range(n)]
    o = 0
    for b in blocks:
        for i, row in enumerate(b):
            for j, x in enumerate(row):
                out[o + i][o + j] = int(x)
        o += len(b)
    return out


def gram_of(r: AdeType, n: int | None = None) -> GramLattice:
    """Gram lattice of ``Q(R)`` or, when ``n`` is given, of ``Q(R) + <n>``."""
    blocks = [gram_of_indecomposable(s) for s in r.symbols]
    if n is None:
        return GramLattice(block_diagonal(blocks), (0, r.rank))
    return GramLattice(block_diagonal(blocks + [[[n]]]), (1, r.rank))


# ---------------------------------------------------------------------------
# Numerical invariants


def group_order(sym: Symbol) -> int:
    """|G_X| = |det Q(X)|."""
    t, k = sym
    if t == "A":
        return k + 1
    if t == "D":
        return 4
    return {6: 3, 7: 2, 8: 1}[k]


def order_of_glue(r: AdeType) -> int:
    out = 1
    for s in r.symbols:
        out *= group_order(s)
    return out


def level(sym: Symbol) -> int:
    """Smallest N with N * q(x) in 2Z for all x in G_X (the column N_X)."""
    t, k = sym
    if t == "A":
        return k + 1 if k % 2 == 0 else 2 * (k + 1)
    if t == "D":
        return 2 if k % 4 == 0 else (4 if k % 4 == 2 else 8)
    return {6: 3, 7: 4, 8: 1}[k]


def level_of(r: AdeType) -> int:
    out = 1
    for s in r.symbols:
        x = level(s)
        out = out * x // gcd(out, x)
    return out


def root_count(sym: Symbol) -> int:
    t, k = sym
    if t == "A":
        return k * (k + 1)
    if t == "D":
        return 2 * k * (k - 1)
    return {6: 72, 7: 126, 8: 240}[k]


def root_count_of(r: AdeType) -> int:
    return sum(root_count(s) for s in r.symbols)


def prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def ordp(x: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# Short vectors


def enumerate_short_vectors(gram: Sequence[Sequence], bound) -> list[tuple[int, ...]]:
    """All nonzero integer vectors ``v`` with ``v G v^T <= bound``.

    ``gram`` must be positive definite (entries may be Fractions). Uses a
    Fincke-Pohst enumeration with exact rational Cholesky data; each pair
    ``v, -v`` is returned twice (both signs).
    """
    n = len(gram)
    g = [[Fraction(x) for x in row] for row in gram]
    # LDL^T: q(v) = sum_i d_i (v_i + sum_{j>i} mu_ij v_j)^2
    mu = [[Fraction(0)] * n for _ in range(n)]
    d = [Fraction(0)] * n
    a = [row[:] for row in g]
    for i in range(n):
        d[i] = a[i][i]
        if d[i] <= 0:
            raise ValueError("Gram matrix is not positive definite")
        for j in range(i + 1, n):
            mu[i][j] = a[i][j] / d[i]
        for j in range(i + 1, n):
            for k in range(j, n):
                a[j][k] -= mu[i][j] * a[i][k]
                a[k][j] = a[j][k]
    bound = Fraction(bound)
    out: list[tuple[int, ...]] = []
    v = [0] * n

    def rec(i: int, rem: Fraction) -> None:
        if i < 0:
            if any(v):
                out.append(tuple(v))
            return
        c = -sum((mu[i][j] * v[j] for j in range(i + 1, n)), Fraction(0))
        # (x - c)^2 <= rem / d_i
        r2 = rem / d[i]
        lo = c - _sqrt_upper(r2)
        hi = c + _sqrt_upper(r2)
        x = _ceil(lo)
        while x <= hi:
            t = d[i] * (x - c) ** 2
            if t <= rem:
                v[i] = x
                rec(i - 1, rem - t)
            x += 1
        v[i] = 0

    rec(n - 1, bound)
    return out


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _sqrt_upper(x: Fraction) -> Fraction:
    """A rational number >= sqrt(x) (and close to it)."""
    if x <= 0:
        return Fraction(0)
    s = isqrt(x.numerator * x.denominator)
    return Fraction(s + 1, x.denominator)


# ---------------------------------------------------------------------------
# Glue group of an indecomposable root type


@dataclass(frozen=True)
class ComponentGlue:
    """Glue group of one indecomposable component.

    Attributes:
        symbol: The root type.
        kind: ``"cyclic"`` (classes added modulo ``order``) or ``"v4"``
            (classes 0..3 added by XOR).
        order: |G_X|.
        lifts: For each class k, a dual vector in that class (a multiple
            or sum of fundamental weights), in rational root coordinates.
        q: q(k) in [0, 2) for every class.
        minnorm: Largest (least negative) norm in each class.
        mincount: Number of vectors realising ``minnorm`` in each class.
    """

    symbol: Symbol
    kind: str
    order: int
    lifts: tuple[tuple[Fraction, ...], ...]
    q: tuple[Fraction, ...]
    minnorm: tuple[Fraction, ...]
    mincount: tuple[int, ...]

    def add(self, a: int, b: int) -> int:
        return a ^ b if self.kind == "v4" else (a + b) % self.order

    def neg(self, a: int) -> int:
        return a if self.kind == "v4" else (-a) % self.order

    def mul(self, c: int, a: int) -> int:
        if self.kind == "v4":
            return a if c % 2 else 0
        return c * a % self.order

    def b(self, x: int, y: int) -> Fraction:
        """Bilinear form value in [0, 1)."""
        v = (self.q[self.add(x, y)] - self.q[x] - self.q[y]) / 2
        return v % 1


def _norm(gram, x) -> Fraction:
    n = len(x)
    return sum((x[i] * gram[i][j] * x[j] for i in range(n) for j in range(n)), Fraction(0))


@lru_cache(maxsize=None)
def component_glue(sym: Symbol) -> ComponentGlue:
    """Glue group data with the generator conventions of this module."""
    t, k = sym
    g = gram_of_indecomposable(sym)
    cinv = inverse_rational([[-x for x in row] for row in g])
    # fundamental weights w_i (rows of C^{-1}) in root coordinates
    w = [tuple(row) for row in cinv]
    zero = tuple(Fraction(0) for _ in range(k))

    def plus(a, b):
        return tuple(x + y for x, y in zip(a, b))

    def times(c, a):
        return tuple(c * x for x in a)

    order = group_order(sym)
    if t == "D" and k % 2 == 0:
        kind = "v4"
        raw = [zero, w[0], w[k - 2], w[k - 1]]
    else:
        kind = "cyclic"
        if t == "A":
            gen = 0
        elif t == "D":
            gen = k - 2
        else:
            gen = 6 if k == 7 else 0
        raw = [times(i, w[gen]) for i in range(order)]
    q = tuple(_norm(g, raw[i]) % 2 for i in range(order))
    mins = tuple(closed_form_minnorm(sym, i) for i in range(order))
    counts = tuple(closed_form_mincount(sym, i) for i in range(order))
    return ComponentGlue(sym, kind, order, tuple(raw), q, mins, counts)


@lru_cache(maxsize=None)
def _dual_short(sym: Symbol, bound: Fraction) -> tuple[tuple[int, ...], ...]:
    """Dual vectors (weight coordinates) with norm >= -bound."""
    g = gram_of_indecomposable(sym)
    cinv = inverse_rational([[-x for x in row] for row in g])
    return tuple(enumerate_short_vectors(cinv, bound))


@lru_cache(maxsize=None)
def _weight_classes(sym: Symbol) -> tuple[int, ...]:
    """Glue class of each fundamental weight, found by lattice membership."""
    k = sym[1]
    glue = component_glue(sym)
    cinv = inverse_rational([[-x for x in row] for row in gram_of_indecomposable(sym)])
    out = []
    for i in range(k):
        found = [m for m in range(glue.order)
                 if all((cinv[i][j] - glue.lifts[m][j]).denominator == 1 for j in range(k))]
        assert len(found) == 1
        out.append(found[0])
    return tuple(out)


def class_of_weight(sym: Symbol, c: Sequence[int]) -> int:
    """Glue class of the dual vector ``sum c_i w_i``."""
    glue = component_glue(sym)
    acc = 0
    for x, cl in zip(c, _weight_classes(sym)):
        if x and cl:
            acc = glue.add(acc, glue.mul(x, cl))
    return acc


@lru_cache(maxsize=None)
def coset_vector_table(sym: Symbol, bound: int = 2) -> tuple[dict[Fraction, int], ...]:
    """For each glue class, a map ``norm -> count`` over dual vectors of norm >= -bound.

    The zero vector is counted (norm 0 in class 0). Classes whose minimum lies
    below ``-bound`` get an empty map.
    """
    order = group_order(sym)
    g = gram_of_indecomposable(sym)
    cinv = inverse_rational([[-x for x in row] for row in g])
    tables: list[dict[Fraction, int]] = [dict() for _ in range(order)]
    tables[0][Fraction(0)] = 1
    for v in _dual_short(sym, Fraction(bound)):
        norm = -_norm(cinv, v)  # norm in the negative definite lattice
        cl = class_of_weight(sym, v)
        tables[cl][norm] = tables[cl].get(norm, 0) + 1
    return tuple(tables)


def closed_form_minnorm(sym: Symbol, k: int) -> Fraction:
    """Closed-form class minima, used as an independent check on the tables."""
    t, r = sym
    if k == 0:
        return Fraction(0)
    if t == "A":
        return Fraction(-k * (r + 1 - k), r + 1)
    if t == "D":
        vector = (k == 1) if r % 2 == 0 else (k == 2)
        return Fraction(-1) if vector else Fraction(-r, 4)
    return {6: Fraction(-4, 3), 7: Fraction(-3, 2)}[r]


def closed_form_mincount(sym: Symbol, k: int) -> int:
    """Number of minimal vectors in glue class ``k``."""
    t, r = sym
    if k == 0:
        return 1
    if t == "A":
        return comb(r + 1, k)
    if t == "D":
        vector = (k == 1) if r % 2 == 0 else (k == 2)
        return 2 * r if vector else 2 ** (r - 1)
    return {6: 27, 7: 56}[r]


def rho_of_glue(r: AdeType, glue: Iterable[Sequence[int]]) -> int:
    """Number of norm -2 vectors in the overlattice of Q(R) by a glue subgroup.

    Args:
        r: Root type.
        glue: All elements of an isotropic subgroup of G_R, each a tuple of
            class numbers (one per component of ``r``).
    """
    total = root_count_of(r)
    tables = [coset_vector_table(s) for s in r.symbols]
    for g in glue:
        if not any(g):
            continue
        # convolve per-component (norm -> count) tables, keeping norms >= -2
        acc = {Fraction(0): 1}
        for tab, cl in zip(tables, g):
            nxt: dict[Fraction, int] = {}
            for n1, c1 in acc.items():
                for n2, c2 in tab[cl].items():
                    s = n1 + n2
                    if s >= -2:
                        nxt[s] = nxt.get(s, 0) + c1 * c2
            acc = nxt
            if not acc:
                break
        total += acc.get(Fraction(-2), 0)
    return total
