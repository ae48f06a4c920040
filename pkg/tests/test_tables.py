from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from k3glue.adelattice import parse_ade
from k3glue.tables import (
    CODE_BITS,
    decode_code,
    diff_maps,
    encode_code,
    format_mw,
    load_codes,
    load_e,
    load_qe,
    load_rdp,
    parse_mw,
    published_nx,
    qe_expanded,
    rdp_map,
)


def test_fixture_sizes():
    rdp = load_rdp()
    assert len(rdp) == 794
    assert [sum(1 for r in rdp if r.p == p) for p in (19, 17, 13, 11)] == [2, 3, 6, 10]
    qe = load_qe()
    assert (len(qe), sum(1 for r in qe if r.p == 2), sum(1 for r in qe if r.p == 3)) == (52, 44, 8)
    assert len(load_e()) == 13
    assert sorted(load_codes()) == list(range(1, 11))


def test_fixture_ranks():
    assert all(r.r.rank == 21 for r in load_rdp())
    assert all(r.r.rank == 20 for r in load_qe())
    assert all(r.r.rank == 20 for r in load_e())


def test_codec_examples():
    assert decode_code(4194303) == (1,) * CODE_BITS
    assert decode_code(0) == (0,) * CODE_BITS
    bits = decode_code(2101246)
    assert bits[0] == 1 and encode_code(bits) == 2101246
    assert load_codes()[9][:2] == [2101246, 2093057]
    assert load_codes()[10] == [4194303]


@given(st.integers(0, (1 << CODE_BITS) - 1))
def test_codec_round_trip(code):
    assert encode_code(decode_code(code)) == code


def test_codec_rejects_out_of_range():
    with pytest.raises(ValueError):
        decode_code(1 << CODE_BITS)
    with pytest.raises(ValueError):
        encode_code([2] + [0] * (CODE_BITS - 1))


def test_mw_strings():
    assert parse_mw("0") == () and parse_mw("[3, 6]") == (3, 6)
    assert format_mw((6, 3)) == "[3,6]" and format_mw(()) == "0"


def test_table_one_values():
    assert published_nx(("A", 3)) == (8, 4)
    assert published_nx(("D", 7)) == (8, 4)
    assert published_nx(("E", 8)) == (1, 1)


def test_qe_rank_expressions():
    tenA2 = next(r for r in load_qe() if r.r == parse_ade("10A2"))
    assert tenA2.sigmas == (1, 2, 3, 4, 5)
    assert [tenA2.torsion_rank(s) for s in tenA2.sigmas] == [4, 3, 2, 1, 0]
    assert qe_expanded(load_qe(), 3)[(3, "10A2", 3)] == 2


def test_diff_engine():
    published = rdp_map(load_rdp(), 19)
    assert diff_maps(dict(published), published).empty
    computed = dict(published)
    key = sorted(computed)[0]
    del computed[key]
    d = diff_maps(computed, published)
    assert d.missing == [(key, published[key])] and not d.extra and not d.mismatched
    computed[key] = (1, 2)
    d = diff_maps(computed, published)
    assert d.mismatched and d.lines()[0].startswith("mismatch")
