from __future__ import annotations

from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from k3glue.exactlin import (
    det,
    hermite_normal_form,
    hnf_with_transform,
    howell_form,
    identity,
    integer_kernel,
    inverse_rational,
    kernel_mod,
    matmul,
    smith_normal_form,
    solve_mod,
    solve_rational,
    transpose,
)


def matrices(rows=st.integers(1, 4), cols=st.integers(1, 4), lo=-9, hi=9):
    return st.tuples(rows, cols).flatmap(
        lambda rc: st.lists(st.lists(st.integers(lo, hi), min_size=rc[1], max_size=rc[1]),
                            min_size=rc[0], max_size=rc[0]))


def square(n=st.integers(1, 4), lo=-9, hi=9):
    return n.flatmap(lambda k: st.lists(st.lists(st.integers(lo, hi), min_size=k, max_size=k),
                                        min_size=k, max_size=k))


def test_smith_known_value():
    snf = smith_normal_form([[2, 4, 4], [-6, 6, 12], [10, -4, -16]])
    assert snf.diag == [2, 6, 12]


def test_det_known_values():
    assert det([[2, -1], [-1, 2]]) == 3
    assert det(identity(5)) == 1
    assert det([[1, 2], [2, 4]]) == 0


@given(matrices())
def test_smith_is_a_decomposition(m):
    snf = smith_normal_form(m)
    d = matmul(matmul(snf.left, m), snf.right)
    for i, row in enumerate(d):
        for j, x in enumerate(row):
            assert x == (snf.diag[i] if i == j else 0)
    nz = [x for x in snf.diag if x]
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))
    assert abs(det(snf.left)) == 1 and abs(det(snf.right)) == 1


@given(matrices())
def test_hnf_and_left_kernel(m):
    h, k = hnf_with_transform(m)
    assert h == hermite_normal_form(m)
    for x in k:
        assert all(sum(x[i] * m[i][j] for i in range(len(m))) == 0 for j in range(len(m[0])))
    assert len(h) + len(k) == len(m)
    for i, row in enumerate(h):
        lead = next(j for j, x in enumerate(row) if x)
        assert row[lead] > 0
        assert all(0 <= h[i2][lead] < row[lead] for i2 in range(i))


@given(matrices())
def test_hnf_is_canonical_under_row_operations(m):
    swapped = m[::-1]
    assert [r for r in hermite_normal_form(m) if any(r)] == [r for r in hermite_normal_form(swapped) if any(r)]


@given(square())
def test_inverse_rational(m):
    if det(m) == 0:
        return
    inv = inverse_rational(m)
    assert matmul(m, inv) == [[Fraction(int(i == j)) for j in range(len(m))] for i in range(len(m))]


@given(matrices())
def test_integer_kernel(m):
    k = integer_kernel(m)
    for v in k:
        assert all(sum(a * b for a, b in zip(row, v)) == 0 for row in m)
    rank = sum(1 for x in smith_normal_form(m).diag if x)
    assert len(k) == len(m[0]) - rank


@given(square(lo=-5, hi=5), st.lists(st.integers(-5, 5), min_size=4, max_size=4))
def test_solve_rational(m, coeffs):
    v = [sum(Fraction(c) * m[i][j] for i, c in enumerate(coeffs[: len(m)])) for j in range(len(m))]
    sol = solve_rational(m, v)
    assert sol is not None
    assert [sum(sol[i] * m[i][j] for i in range(len(m))) for j in range(len(m))] == v


@given(matrices(lo=0, hi=11), st.sampled_from([2, 4, 8, 9, 25]))
def test_howell_span_and_solve(m, modulus):
    h = howell_form(m, modulus)
    # the row spans of m and h agree; solve_mod takes generators as columns
    for row in m:
        assert solve_mod(transpose(h), row, modulus) is not None if h else not any(x % modulus for x in row)
    for row in h:
        assert solve_mod(transpose(m), row, modulus) is not None
    assert howell_form(m[::-1], modulus) == h


@given(matrices(lo=0, hi=7), st.sampled_from([2, 3, 4, 8]))
def test_kernel_mod(m, modulus):
    for v in kernel_mod(m, modulus):
        assert all(sum(a * b for a, b in zip(v, col)) % modulus == 0 for col in transpose(m))
