from __future__ import annotations

import pytest

from k3glue.adelattice import parse_ade
from k3glue.classify_elliptic import (
    EllipticResult,
    add_a1,
    drop_a1,
    elliptic_classify,
    explicit_mordell_weil,
    kodaira_annotate,
    merge_invariants,
    quasi_elliptic_test,
    script_e,
    torsion_rank_check,
    verify_row,
)
from k3glue.classify_rdp import RdpCandidate, RdpResult


def rows_of(text, p):
    rows, complete = elliptic_classify(parse_ade(text), p)
    assert complete
    return [(r.sigma, r.mw, r.quasi) for r in rows]


@pytest.mark.parametrize("text,p,expected", [
    ("2A10", 11, [(1, [], False)]),
    ("2A9+2A1", 2, [(1, [10], False)]),
    ("4A5", 2, [(1, [3, 6], False)]),
    ("A17+3A1", 2, [(1, [6], False)]),
    ("D10+2A5", 3, [(1, [2, 2], False)]),
    ("2E8+D4", 2, [(1, [], True)]),
    ("10A2", 3, [(s, [3] * (5 - s), True) for s in range(1, 6)]),
])
def test_published_rows(text, p, expected):
    assert rows_of(text, p) == expected


def test_no_rows_at_a_prime_outside_the_group():
    assert elliptic_classify(parse_ade("2A10"), 7) == ([], True)


def test_quasi_elliptic_test():
    assert quasi_elliptic_test(parse_ade("2E8+D4"), 2)
    assert not quasi_elliptic_test(parse_ade("A17+3A1"), 2)
    assert quasi_elliptic_test(parse_ade("2E8+2A2"), 3)
    with pytest.raises(ValueError):
        quasi_elliptic_test(parse_ade("2A10"), 11)


def test_kodaira_annotation():
    assert kodaira_annotate(parse_ade("D6"), 2, True) == ["I*2"]
    assert kodaira_annotate(parse_ade("E6"), 3, True) == ["IV*"]
    assert kodaira_annotate(parse_ade("A3"), 5, False) == ["I4"]
    assert kodaira_annotate(parse_ade("A1+A2"), 5, False) == ["I3|IV", "I2|III"]
    with pytest.raises(ValueError):
        kodaira_annotate(parse_ade("A2"), 2, True)


@pytest.mark.parametrize("text,p,sigma,mw", [
    ("2E8+D4", 2, 1, []),
    ("10A2", 3, 3, [3, 3]),
    ("E8+6A2", 3, 2, [3]),
])
def test_torsion_rank_formula(text, p, sigma, mw):
    assert torsion_rank_check(EllipticResult(parse_ade(text), p, sigma, mw, True))


def test_torsion_rank_formula_rejects_wrong_rank():
    assert not torsion_rank_check(EllipticResult(parse_ade("10A2"), 3, 3, [3], True))


def test_merge_invariants():
    assert merge_invariants([[2], [3, 3]]) == [3, 6]
    assert merge_invariants([[2], [5]]) == [10]
    assert merge_invariants([[], []]) == []


def test_explicit_mordell_weil_matches_search():
    rows, _ = elliptic_classify(parse_ade("4A5"), 2)
    (row,) = rows
    assert explicit_mordell_weil(row.r, row.witness) == [3, 6]
    verify_row(row)


def test_verify_row_rejects_a_wrong_group():
    rows, _ = elliptic_classify(parse_ade("2A9+2A1"), 2)
    bad = EllipticResult(rows[0].r, 2, 1, [2, 5], False, rows[0].witness)
    with pytest.raises(AssertionError):
        verify_row(bad)


def test_script_e_bookkeeping():
    r21 = parse_ade("2A10+A1")
    other = parse_ade("A19+2A1")
    results = [
        RdpResult(RdpCandidate(r21, 2, 11), [1], status="complete"),
        RdpResult(RdpCandidate(r21, 2, 2), [], status="complete"),
        RdpResult(RdpCandidate(other, 2, 2), [], status="undecided"),
    ]
    members, undecided = script_e(results)
    assert members == [parse_ade("2A10")]
    assert undecided == [parse_ade("A19+A1")]
    assert add_a1(drop_a1(r21)) == r21


def test_row_json_round_trip():
    rows, _ = elliptic_classify(parse_ade("2A9+2A1"), 2)
    back = EllipticResult.from_json(rows[0].to_json())
    assert back == rows[0]
    assert back.mw_string() == "[10]"
