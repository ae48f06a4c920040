from __future__ import annotations

import random

import pytest

from k3glue.adelattice import order_of_glue, parse_ade
from k3glue.classify_rdp import (
    Partition,
    RdpCandidate,
    RdpResult,
    algorithm_I,
    algorithm_II,
    build_candidates,
    check_conditions,
    classify_candidate,
    coupled_blocks,
    feasible_sigmas,
    np_set,
    pruning_reason,
    verify_witnesses,
)
from k3glue.discform import fqm_of_type
from k3glue.tables import decode_code, load_codes, load_rdp


def test_np_set_examples():
    assert (76, 19) in np_set(parse_ade("A18+A3"))
    assert (2, 2) in np_set(parse_ade("21A1"))
    assert (14, 7) in np_set(parse_ade("E8+E7+A6"))


def test_no_characteristic_23():
    triples, _ = build_candidates()
    assert all(c.p != 23 for c in triples)


def test_pruning_examples():
    # two A2 summands give a 3-part of order 9; with p != 3 and 3 not dividing n it is anisotropic
    triples, _ = build_candidates()
    case_i = [c for c in triples if pruning_reason(c) == "anisotropic-3-part(i)"]
    assert case_i
    for c in case_i:
        assert c.p != 3 and c.r.count(("A", 2)) == 2 and c.n % 3
    assert pruning_reason(RdpCandidate(parse_ade("A18+A3"), 304, 2)) == "n-too-divisible"
    assert pruning_reason(RdpCandidate(parse_ade("A18+A3"), 76, 19)) is None


def test_feasible_sigmas():
    assert feasible_sigmas(fqm_of_type(parse_ade("21A1"), 2), 2) == list(range(1, 11))
    assert feasible_sigmas(fqm_of_type(parse_ade("A18+A3"), 76), 19) == [1]


def test_coupled_blocks():
    # A5 couples 2 and 3; the 7 of A6 stays alone
    assert coupled_blocks(parse_ade("A5+A6+E8+A2"), [2, 3, 7]) == [(2, 3), (7,)]


@pytest.mark.parametrize("sigma", range(1, 11))
def test_table_two_subgroups_pass_the_conditions(sigma):
    gens = [decode_code(c) for c in load_codes()[sigma]]
    rep = check_conditions(parse_ade("21A1"), 2, 2, sigma, gens)
    assert rep.ok, rep


def test_conditions_reject_a_wrong_sigma():
    gens = [decode_code(c) for c in load_codes()[3]]
    assert not check_conditions(parse_ade("21A1"), 2, 2, 4, gens).ok


def test_conditions_reject_new_roots():
    # a weight-4 word in G(21A1) glues four half-roots into a root
    x = (1, 1, 1, 1) + (0,) * 18
    rep = check_conditions(parse_ade("21A1"), 2, 2, 9, [x])
    assert not rep.no_new_roots


def test_algorithm_I_examples():
    assert {p: r.sigmas for p, r in algorithm_I(parse_ade("A18+A3"), 76).items()} == {2: [], 19: [1]}
    assert algorithm_I(parse_ade("2A10+A1"), 2)[11].sigmas == [1]


@pytest.mark.parametrize("text,n,p,sigmas", [
    ("A18+A3", 76, 19, [1]),
    ("2A10+A1", 2, 11, [1]),
    ("E8+2A6+A1", 2, 7, [1]),
    ("E8+E7+A6", 14, 7, [1]),
    ("5A4+A1", 10, 5, [1, 2, 3]),
    ("10A2+A1", 2, 3, [1, 2, 3, 4, 5]),
])
def test_algorithm_II_published_rows(text, n, p, sigmas):
    res = algorithm_II(parse_ade(text), n, p)
    assert res.status == "complete"
    assert res.sigmas == sigmas
    assert verify_witnesses(res)


def _sample(seed=20240917, bound=2000):
    """Five random unpruned candidates and five published rows, all with small groups."""
    rng = random.Random(seed)
    triples, _ = build_candidates()
    pool = [c for c in triples if pruning_reason(c) is None and order_of_glue(c.r) * c.n <= bound]
    published = sorted({RdpCandidate(row.r, row.n, row.p) for row in load_rdp()
                        if order_of_glue(row.r) * row.n <= bound}, key=RdpCandidate.key)
    return rng.sample(pool, 5) + rng.sample(published, 5)


@pytest.mark.parametrize("cand", _sample(), ids=lambda c: c.key())
def test_split_search_agrees_with_whole_group_search(cand):
    """Algorithm II with B empty, with the default split, and Algorithm I give the same sigmas."""
    f = fqm_of_type(cand.r, cand.n)
    whole = algorithm_I(cand.r, cand.n, [cand.p])[cand.p]
    trivial = algorithm_II(cand.r, cand.n, cand.p, Partition.trivial(f.primes(), cand.p))
    default = algorithm_II(cand.r, cand.n, cand.p)
    assert whole.status == trivial.status == default.status == "complete"
    assert whole.sigmas == trivial.sigmas == default.sigmas
    for res in (whole, trivial, default):
        assert verify_witnesses(res)


def test_first_only_reports_existence():
    res = classify_candidate(RdpCandidate(parse_ade("10A2+A1"), 2, 3), first_only=True)
    assert res.status == "exists" and len(res.sigmas) >= 1
    assert verify_witnesses(res)


def test_pruned_candidate_needs_no_search():
    res = classify_candidate(RdpCandidate(parse_ade("A18+A3"), 304, 2))
    assert res.sigmas == [] and res.status == "complete"
    assert res.telemetry == {"pruned": "n-too-divisible"}


def test_result_json_round_trip():
    res = algorithm_II(parse_ade("2A10+A1"), 2, 11)
    back = RdpResult.from_json(res.to_json())
    assert back.candidate == res.candidate and back.sigmas == res.sigmas
    assert verify_witnesses(back)


def test_budget_gives_undecided():
    res = algorithm_II(parse_ade("21A1"), 2, 2, node_budget=3)
    assert res.status == "undecided"
    assert verify_witnesses(res)
