from __future__ import annotations

import pytest

from k3glue.adelattice import parse_ade
from k3glue.symmetry import GlueSpace, enumerate_isotropic, gamma_generators, orbit_closure


def _element_set(space, node):
    f = space.fqm
    out = set()
    for row in node.elements:
        x = [0] * f.ngens
        for c, v in zip(space.col_coord, row):
            x[c] = int(v)
        out.add(tuple(x))
    return frozenset(out)


def _generators_for(r, n, primes, f):
    """Generators of Gamma acting trivially on the primary parts outside ``primes``."""
    gens = gamma_generators(r, n)
    if primes is None:
        return gens
    other = [l for l in f.primes() if l not in primes]
    keep = []
    for g in gens:
        ok = True
        for l in other:
            part = f.primary(l)
            for i in range(part.k):
                u = part.embed(part.fqm.unit(i))
                if part.project(g(f, u)) != part.project(u):
                    ok = False
        if ok:
            keep.append(g)
    return keep


def orbit_check(text, n=None, primes=None, forbid=True, **kw):
    """One representative per Gamma-orbit of admissible subgroups, by brute force."""
    r = parse_ade(text)
    reps = enumerate_isotropic(r, n, primes, forbid, forbid, **kw)
    every = enumerate_isotropic(r, n, primes, forbid, forbid, symmetric=False)
    space = GlueSpace(r, n, primes)
    f = space.fqm
    gens = _generators_for(r, n, primes, f)
    all_sets = {_element_set(space, nd) for nd in every}
    assert len(all_sets) == len(every)
    orbits = []
    rest = set(all_sets)
    while rest:
        orb = orbit_closure(f, gens, lambda s: s, next(iter(rest)))
        assert orb <= all_sets
        rest -= orb
        orbits.append(orb)
    rep_sets = [_element_set(space, nd) for nd in reps]
    assert len(rep_sets) == len(orbits)
    for orb in orbits:
        assert sum(1 for s in rep_sets if s in orb) == 1
    return len(all_sets), len(orbits)


ORBIT_CASES = [
    ("A1", 2, None), ("4A1", None, None), ("4A1", 2, None), ("8A1", None, None), ("8A1", 2, None),
    ("2D4", None, None), ("D4+4A1", 2, None), ("3A2", None, None), ("4A2", 3, None), ("6A2", None, None),
    ("2A3+2A1", 4, None), ("A5+A2+A1", 6, None), ("2A5", 6, None), ("4A3", None, None),
    ("2D5+2A1", 2, None), ("2E6", 3, None), ("2E7+2A1", 2, None), ("A8+A2", None, None),
    ("2A4+A1", 10, None), ("2A5", 6, [2]), ("2A5", 6, [3]), ("2A3+A5", 4, [2]), ("2A11", None, [3]),
]


@pytest.mark.parametrize("text,n,primes", ORBIT_CASES)
def test_one_representative_per_orbit(text, n, primes):
    orbit_check(text, n, primes)


def test_known_orbit_counts():
    # 8A1: weight-4 words create roots, so only 0 and the all-ones word survive
    assert orbit_check("8A1") == (2, 2)
    # 6A2: 0 plus 2^6 / 2 full-weight lines, all isotropic, one orbit under signs
    assert orbit_check("6A2") == (33, 2)


@pytest.mark.parametrize("text,n,primes", [
    ("6A1", 2, None), ("D4+2A1", 2, None), ("4A2", 3, None), ("2A3+A1", 4, None), ("2A5", None, None),
    ("3A3", None, None), ("2E6+A2", None, None), ("A7+A1", 8, None), ("A15", None, None), ("2A7", None, None),
])
def test_reduced_and_unreduced_enumeration_agree(text, n, primes):
    """The orbit-reduced vector stage and the plain one find the same orbits, with and without the root filter."""
    for forbid in (True, False):
        a = orbit_check(text, n, primes, forbid, v_threshold=None)
        b = orbit_check(text, n, primes, forbid, v_threshold=0)
        assert a == b


def test_gamma_generators_preserve_the_form():
    for text, n in [("2A5+A1", 6), ("3D4", None), ("2E6+A2", 3), ("4A1", 2)]:
        r = parse_ade(text)
        space = GlueSpace(r, n)
        for g in gamma_generators(r, n):
            assert g.preserves(space.fqm)
