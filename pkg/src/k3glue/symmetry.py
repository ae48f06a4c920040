"""Symmetries of glue groups and orbit-wise enumeration of isotropic subgroups.

The symmetry group used throughout is the image of ``Aut(Q(R)) x Aut(I(n))``
in ``O(G_R + G_n)``. It is generated by negation of a cyclic component,
the outer automorphisms of D_4 (all permutations of its three nonzero classes)
and of D_m (exchange of the two spinor classes), and permutations of equal
components.

When only the part of G over a set A of primes is searched, the group is cut
down to the elements acting trivially on the other primary parts: a swap of
equal components is kept only if their glue group is an A-group, and a
negation only if it is trivial away from A.

Orbit representatives are produced by a depth-first search that grows a
subgroup one cyclic step of prime order at a time. Each subgroup is turned
into a coloured graph whose automorphisms are exactly the symmetries fixing
it; nauty then supplies both an exact canonical form (used to drop repeated
orbits) and the stabiliser (used to pick one extension per stabiliser orbit).
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, lcm
from typing import Callable, Iterable, Sequence

import numpy as np
import pynauty
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .adelattice import AdeType, component_glue, prime_factors
from .discform import FiniteQuadraticModule, PrimeSubgroup, fqm_of_type
from .exactlin import howell_form, howell_reduce, inverse_rational, kernel_mod, smith_normal_form


class BudgetExceeded(Exception):
    """Raised when a search runs out of its node or time budget."""


# ---------------------------------------------------------------------------
# Automorphisms as matrices on generator residues


@dataclass(frozen=True)
class FqmAutomorphism:
    """A group automorphism given by the images of the generators.

    Attributes:
        images: ``images[i]`` is the image of generator ``e_i``.
        name: Short description for diagnostics.
    """

    images: tuple[tuple[int, ...], ...]
    name: str = ""

    def __call__(self, f: FiniteQuadraticModule, x: Sequence[int]) -> tuple[int, ...]:
        out = [0] * f.ngens
        for a, img in zip(x, self.images):
            if a:
                for j, c in enumerate(img):
                    out[j] += a * c
        return f.reduce(out)

    def preserves(self, f: FiniteQuadraticModule) -> bool:
        """Check q on generators and b on generator pairs."""
        units = [f.unit(i) for i in range(f.ngens)]
        imgs = [self(f, u) for u in units]
        for i in range(f.ngens):
            if f.q_value(imgs[i]) != f.q[i]:
                return False
            for j in range(f.ngens):
                if f.b_value(imgs[i], imgs[j]) != f.b[i][j]:
                    return False
        return True


def _component_coords(f: FiniteQuadraticModule) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for j, lab in enumerate(f.labels):
        out.setdefault(lab, []).append(j)
    return out


def gamma_generators(r: AdeType, n: int | None = None, fixed: Iterable[int] = ()) -> list[FqmAutomorphism]:
    """Generators of the symmetry group acting on ``fqm_of_type(r, n)``.

    Args:
        r: Root type.
        n: Optional I(n) summand.
        fixed: Component indices on which the group must act trivially
            (the I(n) summand has index ``len(r.symbols)``).

    Returns:
        Generators, each verified to preserve q; any failing candidate is
        dropped.
    """
    f = fqm_of_type(r, n)
    coords = _component_coords(f)
    fixed = set(fixed)
    gens: list[FqmAutomorphism] = []
    ident = [f.unit(i) for i in range(f.ngens)]

    def make(mapping: dict[int, tuple[int, ...]], name: str) -> FqmAutomorphism:
        imgs = list(ident)
        for i, v in mapping.items():
            imgs[i] = v
        return FqmAutomorphism(tuple(imgs), name)

    def vec(pairs):
        out = [0] * f.ngens
        for j, c in pairs:
            out[j] = c % f.orders[j]
        return tuple(out)

    syms = list(r.symbols) + ([("I", n)] if n and n > 1 else [])
    for idx, sym in enumerate(syms):
        if idx in fixed or idx not in coords:
            continue
        cs = coords[idx]
        if len(cs) == 1:
            j = cs[0]
            if f.orders[j] > 2:
                gens.append(make({j: vec([(j, -1)])}, f"neg {idx}"))
        else:
            v, s = cs
            # classes: v = e_v, s = e_s, c = e_v + e_s
            if sym == ("D", 4):
                # swap v and s; swap s and c
                gens.append(make({v: vec([(s, 1)]), s: vec([(v, 1)])}, f"D4 (v s) {idx}"))
                gens.append(make({s: vec([(v, 1), (s, 1)])}, f"D4 (s c) {idx}"))
            else:
                gens.append(make({s: vec([(v, 1), (s, 1)])}, f"D (s c) {idx}"))
    # swaps of equal neighbouring components
    for idx in range(len(r.symbols) - 1):
        a, b = idx, idx + 1
        if r.symbols[a] != r.symbols[b] or a in fixed or b in fixed or a not in coords:
            continue
        m = {}
        for ja, jb in zip(coords[a], coords[b]):
            m[ja] = vec([(jb, 1)])
            m[jb] = vec([(ja, 1)])
        gens.append(make(m, f"swap {a} {b}"))
    return [g for g in gens if g.preserves(f)]


def orbit_closure(f: FiniteQuadraticModule, gens: Sequence[FqmAutomorphism], key_of, start) -> set:
    """Brute-force orbit of an object under a group given by generators.

    Args:
        f: The module.
        gens: Group generators.
        key_of: Maps a frozenset of elements to a hashable key.
        start: Frozenset of elements (e.g. all elements of a subgroup).
    """
    seen = {key_of(start)}
    todo = [start]
    while todo:
        cur = todo.pop()
        for g in gens:
            img = frozenset(g(f, x) for x in cur)
            k = key_of(img)
            if k not in seen:
                seen.add(k)
                todo.append(img)
    return seen


# ---------------------------------------------------------------------------
# Search space


@dataclass
class _Comp:
    index: int            # component index (I(n) has len(symbols))
    sym: tuple            # ("A", 5), ... or ("I", n)
    kind: str             # "cyclic" | "v4"
    order: int            # |G_c|
    coords: list[int]     # parent coordinates
    cols: list[int]       # columns in the active element arrays
    values: list[int]     # class numbers of the A-part
    step: int             # spacing of the A-part inside Z/order (cyclic)
    neg_ok: bool
    swap_ok: bool
    outer: str            # "none" | "neg" | "s3" | "sc"
    is_n: bool


class GlueSpace:
    """The A-primary part of G_R (+ G_n) prepared for searching.

    Args:
        r: Root type.
        n: Optional I(n) summand.
        primes: The set A of primes to search over (default: all).
        fixed: Component indices that must not be moved.
        symmetric: If False, no symmetry is used (every subgroup is its own
            orbit); useful as an oracle.
    """

    def __init__(self, r: AdeType, n: int | None = None, primes: Iterable[int] | None = None,
                 fixed: Iterable[int] = (), symmetric: bool = True):
        self.r = r
        self.n = n if n and n > 1 else None
        self.fqm = fqm_of_type(r, self.n)
        allp = self.fqm.primes()
        self.primes = sorted(allp if primes is None else [l for l in primes if l in allp])
        self.symmetric = symmetric
        fixed = set(fixed)
        self.parts = {l: self.fqm.primary(l) for l in self.primes}
        coords = _component_coords(self.fqm)
        syms = list(r.symbols) + ([("I", self.n)] if self.n else [])
        self.comps: list[_Comp] = []
        col = 0
        amask = 1
        for l in self.primes:
            amask *= l
        for idx, sym in enumerate(syms):
            if idx not in coords:
                continue
            is_n = sym[0] == "I"
            if is_n:
                kind, order = "cyclic", self.n
            else:
                g = component_glue(sym)
                kind, order = g.kind, g.order
            apart = 1
            for l in self.primes:
                while order % (apart * l) == 0 and _only_primes(apart * l, self.primes):
                    apart *= l
            if apart == 1:
                continue
            rest = order // apart
            outside = [p for p in prime_factors(order) if p not in self.primes]
            if kind == "v4":
                values = [0, 1, 2, 3]
                step = 1
                neg_ok = False
                outer = "s3" if sym == ("D", 4) else "sc"
            else:
                step = rest
                values = [step * i for i in range(apart)]
                neg_ok = rest <= 2 and apart > 2
                outer = "neg" if neg_ok else "none"
            swap_ok = not outside and not is_n
            if not symmetric or idx in fixed:
                neg_ok, swap_ok, outer = False, False, "none"
            cs = coords[idx]
            self.comps.append(_Comp(idx, sym, kind, order, cs, list(range(col, col + len(cs))),
                                    values, step, neg_ok, swap_ok, outer, is_n))
            col += len(cs)
        self.ncols = col
        self.col_coord = [c for comp in self.comps for c in comp.coords]
        self.mods = np.array([self.fqm.orders[c] for c in self.col_coord], dtype=np.int64)
        self.n_comp = next((c for c in self.comps if c.is_n), None)
        self.r_cols = [c for comp in self.comps if not comp.is_n for c in comp.cols]
        # scaled min norms
        fracs = []
        for comp in self.comps:
            if not comp.is_n:
                fracs += list(component_glue(comp.sym).minnorm)
        self.scale = lcm(*[x.denominator for x in fracs]) if fracs else 1
        self._mn_groups = []
        groups: dict = {}
        for comp in self.comps:
            if comp.is_n:
                continue
            groups.setdefault((comp.sym, comp.kind), []).append(comp)
        for (sym, kind), comps in groups.items():
            g = component_glue(sym)
            table = np.array([int(x * self.scale) for x in g.minnorm], dtype=np.int64)
            if kind == "v4":
                self._mn_groups.append((kind, table, [c.cols[0] for c in comps], [c.cols[1] for c in comps]))
            else:
                self._mn_groups.append((kind, table, [c.cols[0] for c in comps], None))
        # prime-coordinate <-> column maps
        self._pcols: dict[int, list[tuple[int, int, int]]] = {}
        for l, part in self.parts.items():
            col_of = {c: i for i, c in enumerate(self.col_coord)}
            self._pcols[l] = [(t, col_of[j], m) for t, (j, m) in enumerate(zip(part.src, part.mult))]
        self.families: dict = {}
        for comp in self.comps:
            key = comp.sym if comp.swap_ok else ("unique", comp.index)
            self.families.setdefault(key, []).append(comp)

    # -- conversions ----------------------------------------------------------

    def columns_of(self, l: int, t: Sequence[int]) -> np.ndarray:
        """Active-column form of an element of the l-part."""
        out = np.zeros(self.ncols, dtype=np.int64)
        for (i, col, m), a in zip(self._pcols[l], t):
            out[col] = (out[col] + a * m) % self.mods[col]
        return out

    def columns_of_many(self, l: int, ts: np.ndarray) -> np.ndarray:
        out = np.zeros((len(ts), self.ncols), dtype=np.int64)
        for i, col, m in self._pcols[l]:
            out[:, col] = (out[:, col] + ts[:, i] * m) % self.mods[col]
        return out

    def prime_coords(self, l: int, x: np.ndarray) -> tuple[int, ...]:
        part = self.parts[l]
        full = [0] * self.fqm.ngens
        for c, v in zip(self.col_coord, x):
            full[c] = int(v)
        return part.project(full)

    def minnorms(self, arr: np.ndarray) -> np.ndarray:
        """Scaled class min norms (sum over components) for rows of ``arr``."""
        tot = np.zeros(arr.shape[:-1], dtype=np.int64)
        for kind, table, c1, c2 in self._mn_groups:
            if kind == "v4":
                idx = arr[..., c1] + 2 * arr[..., c2]
            else:
                idx = arr[..., c1]
            tot += table[idx].sum(axis=-1)
        return tot

    def bad_rows(self, arr: np.ndarray, forbid_roots: bool, forbid_n: bool) -> np.ndarray:
        """Boolean mask of rows that are roots or nonzero elements of G_n."""
        rpart = arr[..., self.r_cols]
        rzero = ~rpart.any(axis=-1)
        bad = np.zeros(arr.shape[:-1], dtype=bool)
        if self.n_comp is not None:
            ncol = self.n_comp.cols[0]
            nzero = arr[..., ncol] == 0
            if forbid_n:
                bad |= rzero & ~nzero
        else:
            nzero = np.ones(arr.shape[:-1], dtype=bool)
        if forbid_roots:
            bad |= nzero & ~rzero & (self.minnorms(arr) == -2 * self.scale)
        return bad

    # -- symmetry actions on columns -------------------------------------------

    def apply(self, g: "GammaElement", arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        for ci, comp in enumerate(self.comps):
            tgt = self.comps[g.perm[ci]]
            vmap = g.maps[ci]
            if comp.kind == "v4":
                k = arr[..., comp.cols[0]] + 2 * arr[..., comp.cols[1]]
                img = np.asarray(vmap, dtype=np.int64)[k]
                out[..., tgt.cols[0]] = img & 1
                out[..., tgt.cols[1]] = img >> 1
            else:
                sign = vmap
                out[..., tgt.cols[0]] = (sign * arr[..., comp.cols[0]]) % comp.order
        return out


def _only_primes(x: int, primes: Sequence[int]) -> bool:
    for p in primes:
        while x % p == 0:
            x //= p
    return x == 1


@dataclass
class GammaElement:
    """A symmetry in component form.

    Attributes:
        perm: ``perm[i]`` is the position (in ``space.comps``) receiving component i.
        maps: Per component: ``+1``/``-1`` for cyclic ones, a 4-entry class table for v4.
    """

    perm: list[int]
    maps: list


# ---------------------------------------------------------------------------
# Search nodes


class Node:
    """An admissible subgroup of the A-part, given per prime."""

    __slots__ = ("parts", "elements", "key", "_perp", "depth")

    def __init__(self, parts: dict[int, PrimeSubgroup], elements: np.ndarray, key=None, depth: int = 0):
        self.parts = parts
        self.elements = elements
        self.key = key
        self._perp: dict[int, PrimeSubgroup] = {}
        self.depth = depth

    @property
    def order(self) -> int:
        return len(self.elements)

    def perp(self, l: int) -> PrimeSubgroup:
        if l not in self._perp:
            self._perp[l] = self.parts[l].orthogonal()
        return self._perp[l]


def _combine(space: GlueSpace, parts: dict[int, PrimeSubgroup]) -> np.ndarray:
    arr = np.zeros((1, space.ncols), dtype=np.int64)
    for l in space.primes:
        s = parts[l]
        if not s.rows:
            continue
        els = np.array(s.elements(), dtype=np.int64).reshape(-1, s.part.k)
        cols = space.columns_of_many(l, els)
        arr = ((arr[:, None, :] + cols[None, :, :]) % space.mods).reshape(-1, space.ncols)
    return arr


class _Graph(pynauty.Graph):
    """A pynauty graph whose vertex labels are trusted (they are built in bulk)."""

    def _check_vertices(self, vs):
        pass


def _generating_layer(elements: np.ndarray, mods: np.ndarray) -> np.ndarray:
    """Nonzero elements of weight at most w, for the least w at which they generate.

    The weight of an element is its number of nonzero columns. The layer is
    preserved by every symmetry fixing the subgroup and still generates it,
    so its graph has the same automorphisms as the graph of all elements.
    """
    weight = (elements != 0).sum(axis=1)
    order = np.argsort(weight, kind="stable")
    total = len(elements)
    span_arr = np.zeros((1, elements.shape[1]), dtype=elements.dtype)
    span = {span_arr[0].tobytes()}
    cutoff = 0
    for i in order:
        if len(span_arr) == total:
            break
        row = elements[i]
        if not row.any() or row.tobytes() in span:
            continue
        layers = [span_arr]
        cur = span_arr
        while True:
            cur = (cur + row) % mods
            if cur[0].tobytes() in span:
                break
            layers.append(cur)
        span_arr = np.concatenate(layers)
        span = {r.tobytes() for r in span_arr}
        cutoff = weight[i]
    keep = (weight > 0) & (weight <= cutoff)
    return elements[keep]


class _GraphBuilder:
    """Coloured graph of a subgroup whose automorphism group is its stabiliser."""

    def __init__(self, space: GlueSpace):
        self.space = space
        comps = space.comps
        self.comp_vertex = list(range(len(comps)))
        v = len(comps)
        self.value_vertex: list[dict[int, int]] = []
        for comp in comps:
            d = {}
            for val in comp.values:
                d[val] = v
                v += 1
            self.value_vertex.append(d)
        self.base = v
        # static edges and colour cells
        adj: dict[int, list[int]] = {}
        for ci, comp in enumerate(comps):
            adj[ci] = list(self.value_vertex[ci].values())
            if comp.kind == "cyclic" and comp.neg_ok:
                vals = comp.values
                m = len(vals)
                for i in range(m):
                    a = self.value_vertex[ci][vals[i]]
                    b = self.value_vertex[ci][vals[(i + 1) % m]]
                    adj.setdefault(a, []).append(b)
        self.static_adj = adj
        cells: dict = {}
        for key, fam in space.families.items():
            cells[("comp", key)] = {self.comp_vertex[space.comps.index(c)] for c in fam}
            for comp in fam:
                ci = space.comps.index(comp)
                for val, vert in self.value_vertex[ci].items():
                    cells.setdefault(("val", key, self.value_class(comp, val)), set()).add(vert)
        self.static_cells = [cells[k] for k in sorted(cells, key=repr)]

    @staticmethod
    def value_class(comp: _Comp, val: int):
        if comp.outer == "neg":
            return min(val, (-val) % comp.order)
        if comp.outer == "s3":
            return 0 if val == 0 else 1
        if comp.outer == "sc":
            return {0: 0, 1: 1, 2: 2, 3: 2}[val]
        return val

    def graph(self, elements: np.ndarray) -> pynauty.Graph:
        space = self.space
        nz = _generating_layer(elements, space.mods)
        adj = {k: list(v) for k, v in self.static_adj.items()}
        for ci, comp in enumerate(space.comps):
            if comp.kind == "v4":
                vals = nz[:, comp.cols[0]] + 2 * nz[:, comp.cols[1]]
            else:
                vals = nz[:, comp.cols[0]]
            for val, vert in self.value_vertex[ci].items():
                if val:
                    hits = np.flatnonzero(vals == val)
                    if len(hits):
                        adj.setdefault(vert, []).extend((hits + self.base).tolist())
        cells = list(self.static_cells)
        if len(nz):
            cells.append(set(range(self.base, self.base + len(nz))))
        g = _Graph(self.base + len(nz), directed=False, adjacency_dict={}, vertex_coloring=cells)
        g._adjacency_dict = adj
        return g

    def canonical_element(self, lab: Sequence[int]) -> GammaElement:
        """The symmetry that moves a subgroup onto its canonical representative."""
        space = self.space
        pos = [0] * len(lab)
        for i, v in enumerate(lab):
            pos[v] = i
        perm = [0] * len(space.comps)
        maps: list = [None] * len(space.comps)
        for key, fam in space.families.items():
            idxs = [space.comps.index(c) for c in fam]
            ranked = sorted(idxs, key=lambda ci: pos[self.comp_vertex[ci]])
            for tgt, ci in zip(sorted(idxs), ranked):
                perm[ci] = tgt
        for ci, comp in enumerate(space.comps):
            vv = self.value_vertex[ci]
            if comp.outer == "neg":
                step = comp.values[1]
                maps[ci] = 1 if pos[vv[step]] < pos[vv[(-step) % comp.order]] else -1
            elif comp.outer == "s3":
                ranked = sorted((1, 2, 3), key=lambda x: pos[vv[x]])
                m = [0, 0, 0, 0]
                for new, old in zip((1, 2, 3), ranked):
                    m[old] = new
                maps[ci] = m
            elif comp.outer == "sc":
                m = [0, 1, 2, 3] if pos[vv[2]] < pos[vv[3]] else [0, 1, 3, 2]
                maps[ci] = m
            else:
                maps[ci] = [0, 1, 2, 3] if comp.kind == "v4" else 1
        return GammaElement(perm, maps)

    def element_from_perm(self, p: Sequence[int]) -> GammaElement:
        """Symmetry induced by a graph automorphism."""
        space = self.space
        perm = [0] * len(space.comps)
        maps: list = [None] * len(space.comps)
        inv_comp = {v: i for i, v in enumerate(self.comp_vertex)}
        for ci, comp in enumerate(space.comps):
            tj = inv_comp[p[self.comp_vertex[ci]]]
            perm[ci] = tj
            tv = {v: k for k, v in self.value_vertex[tj].items()}
            if comp.kind == "v4":
                maps[ci] = [tv[p[self.value_vertex[ci][k]]] for k in range(4)]
            elif len(comp.values) > 2:
                step = comp.values[1]
                maps[ci] = 1 if tv[p[self.value_vertex[ci][step]]] == step else -1
            else:
                maps[ci] = 1
        return GammaElement(perm, maps)


# ---------------------------------------------------------------------------
# The search


@dataclass
class SearchStats:
    nodes: int = 0
    children_tested: int = 0
    canon_calls: int = 0
    seconds: float = 0.0
    complete: bool = True


class IsotropicSearch:
    """Depth-first enumeration of orbit representatives of admissible subgroups.

    A subgroup is admissible when it is isotropic and, as requested, meets G_n
    trivially and contains no glue class carrying a root (a class of minimal
    norm -2). These conditions pass to subgroups, so every admissible subgroup
    is reached by a chain of admissible cyclic steps of prime order.

    Args:
        space: The search space.
        forbid_roots: Reject classes of minimal norm -2 (outside G_n).
        forbid_n: Reject nonzero elements of G_n.
        extra: Optional further monotone predicate on the element array of a
            candidate subgroup.
        node_budget: Maximum number of nodes to expand.
        time_budget: Maximum seconds.
        max_order: Do not grow subgroups beyond this order.
    """

    def __init__(self, space: GlueSpace, forbid_roots: bool = True, forbid_n: bool = True,
                 extra: Callable[[np.ndarray], bool] | None = None,
                 node_budget: int | None = None, time_budget: float | None = None,
                 max_order: dict[int, int] | None = None):
        self.space = space
        self.forbid_roots = forbid_roots
        self.forbid_n = forbid_n
        self.extra = extra
        self.node_budget = node_budget
        self.time_budget = time_budget
        self.max_order = max_order or {}
        self.builder = _GraphBuilder(space)
        self.stats = SearchStats()
        # extension spaces up to this size are scanned whole
        self.v_threshold = 1 << 12
        self._t0 = 0.0

    # -- canonical forms -----------------------------------------------------

    def canonical_key(self, parts: dict[int, PrimeSubgroup], elements: np.ndarray) -> tuple:
        space = self.space
        self.stats.canon_calls += 1
        if not space.symmetric:
            return tuple((l, parts[l].key()) for l in space.primes)
        g = self.builder.graph(elements)
        lab = pynauty.canon_label(g)
        gam = self.builder.canonical_element(lab)
        return self._image_key(gam, parts)

    def _image_key(self, gam: GammaElement, parts: dict[int, PrimeSubgroup]) -> tuple:
        space = self.space
        out = []
        for l in space.primes:
            s = parts[l]
            gens = s.generators()
            if not gens:
                out.append((l, ()))
                continue
            cols = space.columns_of_many(l, np.array(gens, dtype=np.int64))
            img = space.apply(gam, cols)
            ts = [space.prime_coords(l, row) for row in img]
            part = s.part
            rows = howell_form([part.to_scaled(t) for t in ts], part.modulus)
            out.append((l, tuple(map(tuple, rows))))
        return tuple(out)

    def stabiliser(self, node: Node) -> list[GammaElement]:
        if not self.space.symmetric:
            return []
        g = self.builder.graph(node.elements)
        gens = pynauty.autgrp(g)[0]
        return [self.builder.element_from_perm(p) for p in gens]

    # -- main loop -----------------------------------------------------------

    def root(self) -> Node:
        space = self.space
        parts = {l: PrimeSubgroup(space.parts[l], []) for l in space.primes}
        els = np.zeros((1, space.ncols), dtype=np.int64)
        return Node(parts, els, self.canonical_key(parts, els))

    def run(self, visit: Callable[[Node], bool]) -> SearchStats:
        """Visit every orbit representative once; stop early if ``visit`` returns True."""
        self._t0 = time.monotonic()
        root = self.root()
        seen = {root.key}
        stack = [root]
        self.stats.nodes += 1
        if visit(root):
            self.stats.complete = False
            stack = []
        # nodes are visited as soon as they are created, so shallow subgroups
        # are seen early even though the expansion order is depth first
        while stack:
            node = stack.pop()
            self._check_budget()
            kids = self.children(node, seen)
            for kid in kids:
                self.stats.nodes += 1
                if visit(kid):
                    self.stats.complete = False
                    stack = []
                    break
            else:
                stack.extend(reversed(kids))
        self.stats.seconds = time.monotonic() - self._t0
        return self.stats

    def _check_budget(self) -> None:
        if self.node_budget is not None and self.stats.nodes > self.node_budget:
            self.stats.complete = False
            raise BudgetExceeded(f"node budget {self.node_budget} exhausted")
        if self.time_budget is not None and time.monotonic() - self._t0 > self.time_budget:
            self.stats.complete = False
            raise BudgetExceeded(f"time budget {self.time_budget}s exhausted")

    def children(self, node: Node, seen: set) -> list[Node]:
        out = []
        stab = None
        for l in self.space.primes:
            cap = self.max_order.get(l)
            if cap is not None and node.parts[l].order * l > cap:
                continue
            cands, stab = self._candidates(node, l, stab)
            if len(cands) == 0:
                continue
            for x in self._admissible(node, l, cands):
                s = node.parts[l].extend([x])
                parts = dict(node.parts)
                parts[l] = s
                xc = self.space.columns_of(l, x)
                # new elements: S + a x, a = 0..l-1
                shifts = [node.elements]
                for a in range(1, l):
                    shifts.append((node.elements + a * xc) % self.space.mods)
                els = np.concatenate(shifts)
                if len(els) != s.order * node.order // node.parts[l].order:
                    raise AssertionError("extension is not of prime index")
                key = self.canonical_key(parts, els)
                if key in seen:
                    continue
                seen.add(key)
                out.append(Node(parts, els, key, node.depth + 1))
        return out

    # -- candidate extensions --------------------------------------------------

    def _candidates(self, node: Node, l: int, stab):
        """Elements x of the l-part with x in S^perp, l x in S, x not in S, q(x) = 0.

        Returns one x per orbit of a group fixing S (either the full stabiliser
        or a pointwise stabiliser), as an integer array of prime coordinates.
        """
        space = self.space
        s = node.parts[l]
        perp = node.perp(l)
        part = s.part
        basis = _quotient_socle(s, perp)
        d = len(basis)
        if d == 0:
            return np.zeros((0, part.k), dtype=np.int64), stab
        vsize = l ** d
        cell_est, cells = self._cell_estimate(node, l)
        if vsize <= self.v_threshold or vsize <= cell_est or not space.symmetric:
            if stab is None:
                stab = self.stabiliser(node)
            cands = self._orbit_reps_in_v(node, l, basis, stab)
        else:
            cands = self._cell_candidates(node, l, cells)
        if len(cands) == 0:
            return cands, stab
        # isotropy
        q = _q_scaled(part, cands)
        cands = cands[q == 0]
        return cands, stab

    def _orbit_reps_in_v(self, node: Node, l: int, basis: list, stab: list[GammaElement]) -> np.ndarray:
        space = self.space
        s = node.parts[l]
        part = s.part
        d = len(basis)
        nv = l ** d
        coeffs = np.array(list(itertools.product(range(l), repeat=d)), dtype=np.int64)[:, ::-1]
        # index of coefficient vector c is sum c_j l^j
        weights = l ** np.arange(d, dtype=np.int64)
        bmat = np.array(basis, dtype=np.int64)
        orders = np.array(part.orders, dtype=np.int64)
        rows, cols_ = [], []
        idx = np.arange(nv)
        if l > 2:
            # scalar multiples give the same extension
            g = _primitive_root(l)
            img = (coeffs * g) % l @ weights
            rows.append(idx)
            cols_.append(img)
        if stab:
            solver = _CosetSolver(s, basis)
            for gam in stab:
                imgs = []
                bc = space.columns_of_many(l, bmat)
                ic = space.apply(gam, bc)
                for row in ic:
                    imgs.append(solver.coefficients(space.prime_coords(l, row)))
                m = np.array(imgs, dtype=np.int64)  # d x d
                img = ((coeffs @ m) % l) @ weights
                rows.append(idx)
                cols_.append(img)
        if rows:
            r = np.concatenate(rows)
            c = np.concatenate(cols_)
            graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(nv, nv))
            ncomp, labels = connected_components(graph, directed=False)
            first = np.full(ncomp, nv, dtype=np.int64)
            np.minimum.at(first, labels, idx)
            reps = first
        else:
            reps = idx
        reps = reps[reps != 0]
        return (coeffs[reps] @ bmat) % orders

    def _cell_estimate(self, node: Node, l: int):
        """Cells of components that the pointwise stabiliser of S may permute."""
        space = self.space
        els = node.elements
        cells: dict = {}
        for ci, comp in enumerate(space.comps):
            if not any(pc[1] in comp.cols for pc in space._pcols[l]):
                continue
            column = els[:, comp.cols].tobytes()
            present = set(int(a + 2 * b) for a, b in els[:, comp.cols]) if comp.kind == "v4" \
                else set(int(a) for a in els[:, comp.cols[0]])
            classes = _fixing_classes(comp, present, l)
            fam = comp.sym if comp.swap_ok else ("unique", comp.index)
            key = (fam, column, tuple(map(tuple, classes)))
            cells.setdefault(key, []).append(ci)
        est = 1
        for (fam, column, classes), members in cells.items():
            est *= comb(len(members) + len(classes) - 1, len(classes) - 1)
        return est, cells

    def _cell_candidates(self, node: Node, l: int, cells) -> np.ndarray:
        space = self.space
        s = node.parts[l]
        part = s.part
        # prime coordinate slots per component
        slots: dict[int, list[int]] = {}
        for t, col, m in space._pcols[l]:
            for ci, comp in enumerate(space.comps):
                if col in comp.cols:
                    slots.setdefault(ci, []).append(t)
        choices = []
        for (fam, column, classes), members in cells.items():
            opts = []
            for ms in itertools.combinations_with_replacement(range(len(classes)), len(members)):
                opts.append([(ci, classes[k][0]) for ci, k in zip(members, ms)])
            choices.append(opts)
        out = []
        for combo in itertools.product(*choices):
            t = [0] * part.k
            for cell in combo:
                for ci, val in cell:
                    for slot, v in zip(slots[ci], val):
                        t[slot] = v
            out.append(t)
        cands = np.array(out, dtype=np.int64).reshape(-1, part.k)
        # keep x in S^perp with l x in S and x not in S
        sgens = s.generators()
        if sgens:
            pair = np.array([part.pairing_row(g) for g in sgens], dtype=np.int64)  # r x k
            ok = ((cands @ pair.T) % part.modulus == 0).all(axis=1)
            cands = cands[ok]
        keep = []
        for row in cands:
            t = tuple(int(a) for a in row)
            if not any(t) or s.contains(t):
                continue
            if not s.contains(tuple(l * a % o for a, o in zip(t, part.orders))):
                continue
            keep.append(t)
        return np.array(keep, dtype=np.int64).reshape(-1, part.k)

    def _admissible(self, node: Node, l: int, cands: np.ndarray) -> list[tuple[int, ...]]:
        space = self.space
        if len(cands) == 0:
            return []
        xc = space.columns_of_many(l, cands)  # c x ncols
        ok = np.ones(len(cands), dtype=bool)
        els = node.elements
        chunk = max(1, 400000 // max(1, len(els) * (l - 1)))
        for start in range(0, len(cands), chunk):
            sub = xc[start:start + chunk]
            for a in range(1, l):
                arr = (els[None, :, :] + a * sub[:, None, :]) % space.mods
                bad = space.bad_rows(arr, self.forbid_roots, self.forbid_n).any(axis=1)
                ok[start:start + chunk] &= ~bad
        out = [tuple(int(v) for v in row) for row in cands[ok]]
        if self.extra is not None:
            kept = []
            for x in out:
                xcol = space.columns_of(l, x)
                arr = np.concatenate([els] + [(els + a * xcol) % space.mods for a in range(1, l)])
                if self.extra(arr):
                    kept.append(x)
            out = kept
        return out


def _fixing_classes(comp: _Comp, present: set[int], l: int) -> list[list[tuple[int, ...]]]:
    """Value classes of the l-part of a component under the outer symmetries fixing ``present``.

    Each class is a list of prime-coordinate tuples (one or two entries).
    """
    if comp.kind == "v4":
        vals = [0, 1, 2, 3]
        nonzero = present - {0}
        if comp.outer == "s3" and not nonzero:
            groups = [[0], [1, 2, 3]]
        elif comp.outer == "s3" and len(nonzero) == 1:
            (a,) = nonzero
            groups = [[0], [a], [x for x in (1, 2, 3) if x != a]]
        elif comp.outer == "sc" and nonzero <= {1}:
            groups = [[0], [1], [2, 3]]
        else:
            groups = [[v] for v in vals]
        return [[(v & 1, v >> 1) for v in g] for g in groups]
    # cyclic: l-part values t in Z/l^e correspond to classes t * (order / l^e)
    e = 0
    o = comp.order
    while o % l == 0:
        o //= l
        e += 1
    le = l ** e
    neg_fixes = comp.outer == "neg" and all((2 * v) % comp.order == 0 for v in present)
    groups = []
    seen = set()
    for t in range(le):
        if t in seen:
            continue
        g = [t]
        if neg_fixes and (-t) % le != t:
            g.append((-t) % le)
        seen.update(g)
        groups.append(g)
    return [[(t,) for t in g] for g in groups]


def _primitive_root(l: int) -> int:
    for g in range(2, l):
        if all(pow(g, (l - 1) // p, l) != 1 for p in prime_factors(l - 1)):
            return g
    return 1


def _q_scaled(part, cands: np.ndarray) -> np.ndarray:
    """q(x) * modulus mod 2*modulus for rows of ``cands`` (prime coordinates)."""
    n = part.modulus
    f = part.fqm
    qint = np.array([int(x * n) % (2 * n) for x in f.q], dtype=np.int64)
    tot = (cands * cands) @ qint
    k = f.ngens
    for i in range(k):
        for j in range(i + 1, k):
            if f.b[i][j]:
                tot += 2 * int(f.b[i][j] * n) * cands[:, i] * cands[:, j]
    return tot % (2 * n)


def _quotient_socle(s: PrimeSubgroup, perp: PrimeSubgroup) -> list[tuple[int, ...]]:
    """Representatives of an F_l-basis of {x in S^perp : l x in S} / S.

    This is the l-torsion of S^perp / S. In general it comes from a Smith
    form of the relations among the generators of S^perp modulo S.
    """
    part = s.part
    l = part.l
    gens = perp.generators()
    if all(o == l for o in part.orders):
        cur = s
        basis = []
        for g in gens:
            if not cur.contains(g):
                basis.append(g)
                cur = cur.extend([g])
        return basis
    return _torsion_basis(s, perp)


def _torsion_basis(s: PrimeSubgroup, perp: PrimeSubgroup) -> list[tuple[int, ...]]:
    part = s.part
    l, n = part.l, part.modulus
    prows = [list(r) for r in perp.rows]
    m = len(prows)
    if m == 0:
        return []
    # c in Z^m is a relation when sum c_j P_j lies in S (mod n)
    ker = kernel_mod(prows + [list(r) for r in s.rows], n)
    rel = [list(x[:m]) for x in ker] + [[n * int(i == j) for j in range(m)] for i in range(m)]
    snf = smith_normal_form(rel)
    vinv = [[int(x) for x in row] for row in inverse_rational(snf.right)]
    basis = []
    for i, d in enumerate(snf.diag[:m]):
        if d % l:
            continue
        c = [(d // l) * a for a in vinv[i]]
        y = [sum(cj * prows[j][k] for j, cj in enumerate(c)) % n for k in range(part.k)]
        basis.append(part.from_scaled(y))
    return basis


class _CosetSolver:
    """Coordinates of cosets of S in terms of a basis of an elementary section."""

    def __init__(self, s: PrimeSubgroup, basis: Sequence[Sequence[int]]):
        part = s.part
        self.part = part
        self.d = len(basis)
        n = part.modulus
        rows = []
        for j, b in enumerate(basis):
            rows.append(part.to_scaled(b) + [int(i == j) for i in range(self.d)])
        for r in s.rows:
            rows.append(list(r) + [0] * self.d)
        self.h = howell_form(rows, n)

    def coefficients(self, t: Sequence[int]) -> list[int]:
        part = self.part
        y = part.to_scaled(t) + [0] * self.d
        red = howell_reduce(self.h, y, part.modulus)
        if any(red[:part.k]):
            raise AssertionError("element outside the section")
        return [(-x) % part.l for x in red[part.k:]]


# ---------------------------------------------------------------------------
# Convenience wrappers


def enumerate_isotropic(r: AdeType, n: int | None = None, primes: Iterable[int] | None = None,
                        forbid_roots: bool = True, forbid_n: bool = True,
                        symmetric: bool = True, fixed: Iterable[int] = (),
                        node_budget: int | None = None, v_threshold: int | None = None) -> list[Node]:
    """All orbit representatives of admissible isotropic subgroups, in visiting order."""
    space = GlueSpace(r, n, primes, fixed=fixed, symmetric=symmetric)
    search = IsotropicSearch(space, forbid_roots, forbid_n, node_budget=node_budget)
    if v_threshold is not None:
        search.v_threshold = v_threshold
    out: list[Node] = []
    search.run(lambda node: out.append(node) and False)
    return out
