"""Exact integer and rational linear algebra.

Matrices are plain lists of lists of Python ints (or ``Fraction`` for the
rational helpers). Nothing here uses floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

IntMatrix = list[list[int]]
RatMatrix = list[list[Fraction]]


def identity(n: int) -> IntMatrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def transpose(m: Sequence[Sequence]) -> list[list]:
    if not m:
        return []
    return [list(col) for col in zip(*m)]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list]:
    bt = transpose(b)
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def _copy(m: Sequence[Sequence[int]]) -> IntMatrix:
    return [list(map(int, row)) for row in m]


@dataclass
class SmithDecomposition:
    """Result of a Smith normal form computation.

    Attributes:
        left: Unimodular matrix U (rows x rows).
        diag: Elementary divisors d_1 | d_2 | ... (length min(rows, cols)),
            non-negative, zeros at the end.
        right: Unimodular matrix V (cols x cols) with U * m * V = diag.
    """

    left: IntMatrix
    diag: list[int]
    right: IntMatrix


def smith_normal_form(m: Sequence[Sequence[int]]) -> SmithDecomposition:
    """Smith normal form with both transforms.

    Args:
        m: Integer matrix (possibly rectangular, possibly empty).

    Returns:
        SmithDecomposition with ``left @ m @ right`` diagonal.
    """
    a = _copy(m)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    u = identity(rows)
    v = identity(cols)

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, c):
        # row_dst += c * row_src
        if c:
            ra, rs = a[dst], a[src]
            for k in range(cols):
                ra[k] += c * rs[k]
            ua, us = u[dst], u[src]
            for k in range(rows):
                ua[k] += c * us[k]

    def add_col(dst, src, c):
        if c:
            for row in a:
                row[dst] += c * row[src]
            for row in v:
                row[dst] += c * row[src]

    t = 0
    while t < min(rows, cols):
        # pick the smallest nonzero entry in the remaining block as pivot
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                x = a[i][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            p = a[t][t]
            done = True
            for i in range(t + 1, rows):
                if a[i][t]:
                    add_row(i, t, -(a[i][t] // p))
                    if a[i][t]:
                        done = False
            for j in range(t + 1, cols):
                if a[t][j]:
                    add_col(j, t, -(a[t][j] // p))
                    if a[t][j]:
                        done = False
            if done:
                # divisibility of the rest of the block
                bad = None
                for i in range(t + 1, rows):
                    for j in range(t + 1, cols):
                        if a[i][j] % p:
                            bad = i
                            break
                    if bad is not None:
                        break
                if bad is None:
                    break
                add_row(t, bad, 1)
                continue
            # move the smallest remaining entry of row/col t onto the pivot
            best = (abs(a[t][t]), t, t)
            for i in range(t + 1, rows):
                if a[i][t] and abs(a[i][t]) < best[0]:
                    best = (abs(a[i][t]), i, t)
            for j in range(t + 1, cols):
                if a[t][j] and abs(a[t][j]) < best[0]:
                    best = (abs(a[t][j]), t, j)
            _, i, j = best
            if i != t:
                swap_rows(t, i)
            if j != t:
                swap_cols(t, j)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            u[t] = [-x for x in u[t]]
        t += 1
    diag = [a[i][i] for i in range(min(rows, cols))]
    return SmithDecomposition(u, diag, v)


def hermite_normal_form(m: Sequence[Sequence[int]]) -> IntMatrix:
    """Row-style Hermite normal form of the row lattice of ``m``.

    Rows are upper echelon with positive pivots and entries above each pivot
    reduced into ``[0, pivot)``. Zero rows are dropped, so the result is a
    basis of the row lattice and is unique for that lattice.
    """
    return hnf_with_transform(m)[0]


def hnf_with_transform(m: Sequence[Sequence[int]]) -> tuple[IntMatrix, IntMatrix]:
    """Hermite normal form together with the rows spanning the left kernel.

    Returns:
        ``(h, k)`` where ``h`` is the HNF of the row lattice of ``m`` and
        ``k`` is a basis of ``{x : x m = 0}`` (as rows).
    """
    a = _copy(m)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    t = identity(rows)
    r = 0
    pivots = []
    for c in range(cols):
        if r == rows:
            break
        # gcd-reduce column c among rows r..end
        while True:
            nz = [i for i in range(r, rows) if a[i][c]]
            if not nz:
                break
            i0 = min(nz, key=lambda i: abs(a[i][c]))
            if i0 != r:
                a[r], a[i0] = a[i0], a[r]
                t[r], t[i0] = t[i0], t[r]
            if len(nz) == 1 and nz[0] in (r, i0):
                break
            p = a[r][c]
            changed = False
            for i in range(r + 1, rows):
                if a[i][c]:
                    q = a[i][c] // p
                    ai, ar, ti, tr = a[i], a[r], t[i], t[r]
                    for k in range(cols):
                        ai[k] -= q * ar[k]
                    for k in range(rows):
                        ti[k] -= q * tr[k]
                    changed = True
            if not changed:
                break
        if a[r][c] == 0:
            continue
        if a[r][c] < 0:
            a[r] = [-x for x in a[r]]
            t[r] = [-x for x in t[r]]
        p = a[r][c]
        for i in range(r):
            q = a[i][c] // p
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[r])]
                t[i] = [x - q * y for x, y in zip(t[i], t[r])]
        pivots.append(c)
        r += 1
    return a[:r], t[r:]


def integer_kernel(m: Sequence[Sequence[int]]) -> IntMatrix:
    """Basis (rows) of the integer right kernel ``{v : m v = 0}``."""
    if not m:
        return []
    _, k = hnf_with_transform(transpose(m))
    return hermite_normal_form(k) if k else []


def det(m: Sequence[Sequence[int]]) -> int:
    """Determinant by fraction-free Bareiss elimination."""
    a = _copy(m)
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k]:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def inverse_rational(m: Sequence[Sequence]) -> RatMatrix:
    """Exact inverse over Q by Gauss-Jordan elimination.

    Raises:
        ValueError: if ``m`` is singular.
    """
    n = len(m)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(m)]
    for c in range(n):
        piv = next((i for i in range(c, n) if a[i][c] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return [row[n:] for row in a]


def solve_rational(basis: Sequence[Sequence], v: Sequence) -> list[Fraction] | None:
    """Coefficients ``c`` with ``c @ basis == v`` over Q, or None."""
    rows = len(basis)
    cols = len(v)
    a = [[Fraction(basis[i][j]) for i in range(rows)] + [Fraction(v[j])] for j in range(cols)]
    piv_cols = []
    r = 0
    for c in range(rows):
        p = next((i for i in range(r, cols) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(cols):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        piv_cols.append(c)
        r += 1
    for i in range(r, cols):
        if a[i][rows] != 0:
            return None
    out = [Fraction(0)] * rows
    for i, c in enumerate(piv_cols):
        out[c] = a[i][rows]
    return out


# ---------------------------------------------------------------------------
# Modules over Z/N


def _prime_power(n: int) -> tuple[int, int]:
    """Return (l, e) with n = l**e, raising if n is not a prime power."""
    if n < 2:
        raise ValueError("modulus must be >= 2")
    l = 2
    while l * l <= n and n % l:
        l += 1
    if n % l:
        l = n
    e = 0
    m = n
    while m % l == 0:
        m //= l
        e += 1
    if m != 1:
        raise ValueError(f"{n} is not a prime power")
    return l, e


def _val(x: int, l: int) -> int:
    v = 0
    while x % l == 0:
        x //= l
        v += 1
    return v


def howell_form(m: Sequence[Sequence[int]], modulus: int) -> IntMatrix:
    """Howell form of the row span of ``m`` over Z/modulus, modulus a prime power.

    The result is echelon, each pivot is a power of the prime, entries above a
    pivot are reduced modulo it, and the span of the rows whose first ``j``
    entries vanish is exactly the part of the module with that property. It is
    therefore a canonical form of the submodule.
    """
    n = modulus
    l, e_max = _prime_power(n)
    ncols = len(m[0]) if m else 0
    pending = [[x % n for x in row] for row in m]
    pending = [r for r in pending if any(r)]
    result: list[tuple[int, int, list[int]]] = []
    for col in range(ncols):
        best = None
        bv = e_max
        for i, r in enumerate(pending):
            a = r[col]
            if a:
                v = _val(a, l)
                if best is None or v < bv:
                    best, bv = i, v
                    if v == 0:
                        break
        if best is None:
            continue
        piv = pending.pop(best)
        lv = l ** bv
        unit = piv[col] // lv
        if unit != 1:
            uinv = pow(unit, -1, n)
            piv = [x * uinv % n for x in piv]
        rest = []
        for r in pending:
            a = r[col]
            if a:
                c = a // lv
                r = [(x - c * y) % n for x, y in zip(r, piv)]
            if any(r):
                rest.append(r)
        if bv > 0:
            extra = [x * (n // lv) % n for x in piv]
            if any(extra):
                rest.append(extra)
        pending = rest
        result.append((col, lv, piv))
    rows = [r for _, _, r in result]
    for i, (col, lv, piv) in enumerate(result):
        for j in range(i):
            c = rows[j][col] // lv
            if c:
                rows[j] = [(x - c * y) % n for x, y in zip(rows[j], piv)]
    return rows


def howell_reduce(h: Sequence[Sequence[int]], v: Sequence[int], modulus: int) -> list[int]:
    """Canonical representative of ``v`` modulo the span of a Howell form ``h``."""
    n = modulus
    out = [x % n for x in v]
    for row in h:
        col = next(i for i, x in enumerate(row) if x)
        p = row[col]
        c = out[col] // p
        if c:
            out = [(x - c * y) % n for x, y in zip(out, row)]
    return out


def solve_mod(m: Sequence[Sequence[int]], target: Sequence[int], modulus: int) -> list[int] | None:
    """Solve ``m x = target`` over Z/modulus (modulus a prime power).

    Args:
        m: k x r matrix; its columns are the generators.
        target: Length-k vector.
        modulus: Prime power.

    Returns:
        One solution ``x`` (length r) or None if none exists.
    """
    k = len(m)
    r = len(m[0]) if k else 0
    aug = [[m[i][j] for i in range(k)] + [int(i == j) for i in range(r)] for j in range(r)]
    if not aug:
        return [] if all(t % modulus == 0 for t in target) else None
    h = howell_form(aug, modulus)
    red = howell_reduce(h, list(target) + [0] * r, modulus)
    if any(red[:k]):
        return None
    return [(-x) % modulus for x in red[k:]]


def kernel_mod(m: Sequence[Sequence[int]], modulus: int) -> IntMatrix:
    """Howell basis of the left kernel ``{x : x m = 0}`` over Z/modulus."""
    rows = len(m)
    cols = len(m[0]) if rows else 0
    aug = [list(m[i]) + [int(i == j) for j in range(rows)] for i in range(rows)]
    h = howell_form(aug, modulus)
    ker = [row[cols:] for row in h if not any(row[:cols])]
    return howell_form(ker, modulus) if ker else []
