"""Published tables as fixtures, the 22-bit code of Table 2, and a diff engine.

Each table ships as a TSV file under ``data/``: three ``#`` header lines (a
title, a provenance note and a sha256 of the remaining lines), a column header
and one row per published row. Loading verifies the checksum.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

from .adelattice import AdeType, Symbol, format_ade, parse_ade

CODE_BITS = 22


class FixtureError(Exception):
    """A fixture file is missing, malformed or fails its checksum."""


def _read(name: str) -> list[dict[str, str]]:
    text = resources.files("k3glue").joinpath("data").joinpath(name).read_text()
    lines = text.splitlines(keepends=True)
    meta = [ln for ln in lines if ln.startswith("#")]
    data = "".join(ln for ln in lines if not ln.startswith("#"))
    want = next((ln.split(":", 1)[1].strip() for ln in meta if ln.startswith("# sha256:")), None)
    if want is None or hashlib.sha256(data.encode()).hexdigest() != want:
        raise FixtureError(f"checksum mismatch in {name}")
    rows = [ln.rstrip("\n").split("\t") for ln in data.splitlines() if ln.strip()]
    header, body = rows[0], rows[1:]
    for r in body:
        if len(r) != len(header):
            raise FixtureError(f"bad row in {name}: {r}")
    return [dict(zip(header, r)) for r in body]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


# ---------------------------------------------------------------------------
# Rows


@dataclass(frozen=True)
class RdpRow:
    p: int
    r: AdeType
    n: int
    sigmas: tuple[int, ...]

    def key(self) -> tuple:
        return (self.p, format_ade(self.r), self.n)


@dataclass(frozen=True)
class QeRow:
    """A quasi-elliptic row; ``r_expr`` is ``"k"`` or ``"k-sigma"``."""

    p: int
    r: AdeType
    sigmas: tuple[int, ...]
    r_expr: str

    def key(self) -> tuple:
        return (self.p, format_ade(self.r))

    def torsion_rank(self, sigma: int) -> int:
        m = re.fullmatch(r"(\d+)(-sigma)?", self.r_expr)
        if not m:
            raise FixtureError(f"bad rank expression {self.r_expr}")
        k = int(m.group(1))
        return k - sigma if m.group(2) else k


@dataclass(frozen=True)
class ERow:
    p: int
    r: AdeType
    sigma: int
    mw: tuple[int, ...]

    def key(self) -> tuple:
        return (self.p, format_ade(self.r), self.sigma, self.mw)


def parse_mw(s: str) -> tuple[int, ...]:
    """'0' -> (), '[10]' -> (10,), '[3,6]' -> (3, 6)."""
    s = s.replace(" ", "")
    if s == "0":
        return ()
    m = re.fullmatch(r"\[(\d+(?:,\d+)*)\]", s)
    if not m:
        raise FixtureError(f"bad MW string {s}")
    return tuple(sorted(_ints(m.group(1))))


def format_mw(mw: Iterable[int]) -> str:
    mw = sorted(mw)
    return "0" if not mw else "[" + ",".join(map(str, mw)) + "]"


def load_rdp() -> list[RdpRow]:
    out = []
    for d in _read("table_rdp.tsv"):
        out.append(RdpRow(int(d["p"]), parse_ade(d["R"]), int(d["n"]), tuple(_ints(d["sigmas"]))))
    return out


def load_qe() -> list[QeRow]:
    return [QeRow(int(d["p"]), parse_ade(d["R"]), tuple(_ints(d["sigmas"])), d["r"]) for d in _read("table_qe.tsv")]


def load_e() -> list[ERow]:
    return [ERow(int(d["p"]), parse_ade(d["R"]), int(d["sigma"]), parse_mw(d["MW"])) for d in _read("table_e.tsv")]


def load_codes() -> dict[int, list[int]]:
    """sigma -> generator codes of Table 2."""
    return {int(d["sigma"]): _ints(d["generators"]) for d in _read("table_codes.tsv")}


def load_nx() -> list[dict[str, str]]:
    return _read("table_nx.tsv")


def published_nx(sym: Symbol) -> tuple[int, int]:
    """(N_X, |G_X|) evaluated from the Table 1 fixture."""
    t, k = sym
    for d in load_nx():
        if d["family"] != t:
            continue
        case = d["case"]
        ok = {
            "l_even": k % 2 == 0, "l_odd": k % 2 == 1,
            "m_0mod4": k % 4 == 0, "m_2mod4": k % 4 == 2, "m_odd": k % 2 == 1,
            "n_6": k == 6, "n_7": k == 7, "n_8": k == 8,
        }[case]
        if ok:
            return _eval(d["N_X"], k), _eval(d["G_X"], k)
    raise KeyError(sym)


def _eval(expr: str, k: int) -> int:
    if expr == "l+1":
        return k + 1
    if expr == "2(l+1)":
        return 2 * (k + 1)
    return int(expr)


# ---------------------------------------------------------------------------
# Table 2 codec


def decode_code(code: int) -> tuple[int, ...]:
    """22 bits (x_1, ..., x_21, y), x_1 the most significant."""
    if not 0 <= code < 1 << CODE_BITS:
        raise ValueError(f"code {code} out of range")
    return tuple((code >> (CODE_BITS - 1 - i)) & 1 for i in range(CODE_BITS))


def encode_code(bits: Iterable[int]) -> int:
    bits = list(bits)
    if len(bits) != CODE_BITS or any(b not in (0, 1) for b in bits):
        raise ValueError("need 22 bits")
    out = 0
    for b in bits:
        out = 2 * out + b
    return out


# ---------------------------------------------------------------------------
# Diffs


@dataclass
class Diff:
    """Set difference between computed and published rows, keyed per table."""

    missing: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    mismatched: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (self.missing or self.extra or self.mismatched)

    def lines(self) -> list[str]:
        out = [f"missing\t{k}\t{v}" for k, v in self.missing]
        out += [f"extra\t{k}\t{v}" for k, v in self.extra]
        out += [f"mismatch\t{k}\tcomputed={a}\tpublished={b}" for k, a, b in self.mismatched]
        return out


def diff_maps(computed: dict, published: dict) -> Diff:
    """Order-insensitive comparison of two key -> value maps."""
    d = Diff()
    for k in sorted(set(published) - set(computed), key=repr):
        d.missing.append((k, published[k]))
    for k in sorted(set(computed) - set(published), key=repr):
        d.extra.append((k, computed[k]))
    for k in sorted(set(computed) & set(published), key=repr):
        if computed[k] != published[k]:
            d.mismatched.append((k, computed[k], published[k]))
    return d


def rdp_map(rows: Iterable[RdpRow], p: int | None = None) -> dict:
    return {r.key(): tuple(r.sigmas) for r in rows if p is None or r.p == p}


def qe_expanded(rows: Iterable[QeRow], p: int | None = None) -> dict:
    """(p, R, sigma) -> torsion rank, one entry per sigma."""
    out = {}
    for r in rows:
        if p is not None and r.p != p:
            continue
        for s in r.sigmas:
            out[(r.p, format_ade(r.r), s)] = r.torsion_rank(s)
    return out


def e_set(rows: Iterable[ERow], p: int | None = None) -> dict:
    return {r.key(): True for r in rows if p is None or r.p == p}
