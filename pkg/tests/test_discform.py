from __future__ import annotations

from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from k3glue.adelattice import gram_of, parse_ade
from k3glue.discform import (
    Subgroup,
    discriminant_form,
    fqm_of_type,
    is_p_elementary,
    is_type_I,
    overlattice,
    quotient_structure,
)
from k3glue.exactlin import det

# (type, n) with |G| <= 64
SMALL = [("4A1", None), ("6A1", None), ("5A1", 2), ("2A3", None), ("A3+2A1", 2), ("D4+2A1", None),
         ("2A2+A1", 2), ("A7", 8), ("2D5", None), ("A5+A2", None), ("E7+2A1", 4), ("3A3", None),
         ("2A4", None), ("A8", None), ("E6+A2+A1", 2), ("D6", 2), ("A1", 2), ("2D4", None),
         ("3A2", None), ("D4+A1", 8), ("A15", None), ("4A1", 4), ("2A1", 16)]


@st.composite
def module_and_subgroup(draw):
    text, n = draw(st.sampled_from(SMALL))
    f = fqm_of_type(parse_ade(text), n)
    assert f.order <= 64
    gens = draw(st.lists(st.tuples(*[st.integers(0, m - 1) for m in f.orders]), max_size=3))
    return f, Subgroup.generated(f, gens)


def test_orders_are_determinants():
    for text, n in SMALL:
        lat = gram_of(parse_ade(text), n)
        assert fqm_of_type(parse_ade(text), n).order == abs(det(lat.gram))
        assert discriminant_form(lat).order == abs(det(lat.gram))


@given(module_and_subgroup())
def test_orthogonal_complement_laws(fs):
    f, s = fs
    perp = s.orthogonal()
    assert s.order * perp.order == f.order
    assert set(perp.orthogonal().elements()) == set(s.elements())
    els = s.elements()
    assert len(set(els)) == s.order
    for x in perp.elements():
        assert all(f.b_value(x, y) == 0 for y in els)


@given(module_and_subgroup())
def test_isotropic_laws(fs):
    f, s = fs
    iso = all(f.q_value(x) == 0 for x in s.elements())
    assert s.is_isotropic() == iso
    if not iso:
        return
    assert set(s.elements()) <= set(s.orthogonal().elements())
    assert s.order ** 2 <= f.order


@given(st.sampled_from(SMALL), st.data())
def test_overlattice_discriminant(case, data):
    text, n = case
    r = parse_ade(text)
    f = fqm_of_type(r, n)
    iso = [x for x in f.elements() if any(x) and f.q_value(x) == 0]
    if not iso:
        return
    x = data.draw(st.sampled_from(iso))
    s = Subgroup.generated(f, [x])
    lat = gram_of(r, n)
    over = overlattice(lat, f, [x])
    assert over.index == s.order
    assert abs(det(over.gram)) * s.order ** 2 == f.order
    assert discriminant_form(over.gram).order == s.orthogonal().order // s.order
    inv, free = quotient_structure(over.basis, [[Fraction(int(i == j)) for j in range(len(lat.gram))]
                                                for i in range(len(lat.gram))])
    assert free == 0 and sorted(inv) == sorted(s.invariants())


@given(module_and_subgroup(), st.data())
def test_form_identities(fs, data):
    f, _ = fs
    el = st.tuples(*[st.integers(0, m - 1) for m in f.orders])
    x, y = data.draw(el), data.draw(el)
    c = data.draw(st.integers(-4, 4))
    two = Fraction(2)
    assert (f.q_value(f.add(x, y)) - f.q_value(x) - f.q_value(y) - 2 * f.b_value(x, y)) % two == 0
    assert (f.q_value(f.scale(c, x)) - c * c * f.q_value(x)) % two == 0
    assert f.b_value(x, y) == f.b_value(y, x)
    assert (f.q_value(x) - f.b_value(x, x)) % 1 == 0


def test_elementary_and_type():
    assert is_p_elementary(gram_of(parse_ade("10A2")).gram, 3)
    assert not is_p_elementary(gram_of(parse_ade("A8")).gram, 3)
    assert is_p_elementary(gram_of(parse_ade("2E8+D4")).gram, 2)
    assert is_type_I([[2]]) is False
    assert is_type_I([[2, 0], [0, 2]]) is False
    assert is_type_I(gram_of(parse_ade("D4")).gram) is True


@given(module_and_subgroup())
def test_invariants_against_element_orders(fs):
    """Invariant factors reproduce the order and exponent of any subgroup, including mixed ones."""
    f, s = fs
    inv = s.invariants()
    prod = 1
    for d in inv:
        prod *= d
    assert prod == s.order
    assert all(b % a == 0 for a, b in zip(inv, inv[1:]))
    assert max(inv, default=1) == max(f.element_order(x) for x in s.elements())


def test_invariants_of_mixed_group():
    f = fqm_of_type(parse_ade("4A5"))
    assert Subgroup.generated(f, list(f.elements())).invariants() == [6, 6, 6, 6]
    g = fqm_of_type(parse_ade("E6+A2+A1"), 2)
    assert Subgroup.generated(g, [(1, 2, 1, 1)]).invariants() == [6]


def _q_histogram(f, elements):
    out = {}
    for x in elements:
        v = f.q_value(x)
        out[v] = out.get(v, 0) + 1
    return out


def _quotient_histogram(f, s, perp):
    """q-value counts on S^perp / S, one value per coset."""
    seen, out = set(), {}
    s_els = s.elements()
    for x in perp.elements():
        if x in seen:
            continue
        coset = {f.add(x, y) for y in s_els}
        seen |= coset
        v = f.q_value(x)
        out[v] = out.get(v, 0) + 1
    return out


def test_nikulin_laws_on_every_isotropic_subgroup():
    """For every isotropic S: |S|^2 |disc| = |G| and disc(Lambda_S) is isometric to S^perp / S."""
    from k3glue.symmetry import GlueSpace, enumerate_isotropic

    total = 0
    for text, n in SMALL:
        r = parse_ade(text)
        f = fqm_of_type(r, n)
        assert f.order <= 64
        lat = gram_of(r, n)
        space = GlueSpace(r, n)
        for node in enumerate_isotropic(r, n, None, False, False, symmetric=False):
            els = []
            for row in node.elements:
                x = [0] * f.ngens
                for c, v in zip(space.col_coord, row):
                    x[c] = int(v)
                els.append(tuple(x))
            s = Subgroup.generated(f, els)
            assert s.order == len(set(els)) and s.is_isotropic()
            perp = s.orthogonal()
            over = overlattice(lat, f, s.generators())
            assert over.index == s.order
            assert abs(det(over.gram)) * s.order ** 2 == f.order
            d = discriminant_form(over.gram)
            assert d.order * s.order == perp.order
            assert _q_histogram(d, d.elements()) == _quotient_histogram(f, s, perp)
            total += 1
    assert total > len(SMALL)
