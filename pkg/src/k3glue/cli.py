"""Command line front end.

Commands:
    candidates          list [R, n, p] candidates and the pruning summary
    classify-rdp        classify candidates (results are cached per candidate)
    classify-elliptic   build the list of rank-20 types and classify fibrations
    verify              diff cached results against a published table
    cache               list or clean the result cache

Exit codes: 0 success (or empty diff), 1 error or nonempty diff, 2 undecided
candidates in scope.
"""
from __future__ import annotations

import argparse
import fnmatch
import json
import logging
import os
import sys
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Iterable

from .adelattice import AdeType, format_ade, parse_ade
from .classify_elliptic import (
    EllipticResult,
    add_a1,
    elliptic_classify,
    kodaira_annotate,
    script_e,
)
from .classify_rdp import (
    RdpCandidate,
    RdpResult,
    build_candidates,
    check_conditions,
    classify_candidate,
    prune,
    pruning_reason,
    verify_witnesses,
)
from .tables import decode_code, diff_maps, format_mw, load_codes, load_e, load_qe, load_rdp, qe_expanded, rdp_map

SCHEMA = 1
EXPECTED = {"triples": 20169, "pairs": 14487, "pruned_triples": 9247, "pruned_pairs": 7722}
EXIT_OK, EXIT_ERROR, EXIT_UNDECIDED = 0, 1, 2

log = logging.getLogger("k3glue")


# ---------------------------------------------------------------------------
# Cache


class ResultCache:
    """One JSON document per task under ``<root>/<kind>/``."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def _path(self, kind: str, key: str) -> Path:
        return self.root / kind / (key.replace("/", "__").replace("+", "_") + ".json")

    def get(self, kind: str, key: str) -> dict | None:
        path = self._path(kind, key)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            return None
        if doc.get("schema") != SCHEMA or doc.get("key") != key:
            return None
        return doc

    def put(self, kind: str, key: str, payload: dict) -> None:
        path = self._path(kind, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"schema": SCHEMA, "key": key, **payload}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
        tmp.replace(path)

    def entries(self, kind: str) -> list[Path]:
        d = self.root / kind
        return sorted(d.glob("*.json")) if d.exists() else []


def default_cache_dir() -> str:
    return os.environ.get("K3GLUE_CACHE", ".k3glue-cache")


# ---------------------------------------------------------------------------
# Filters


def r_matcher(pattern: str | None) -> Callable[[AdeType], bool]:
    """Exact type when the pattern parses, otherwise a glob on the R-string."""
    if not pattern:
        return lambda r: True
    try:
        want = parse_ade(pattern)
        return lambda r: r == want
    except ValueError:
        return lambda r: fnmatch.fnmatchcase(format_ade(r), pattern)


def _scope(args) -> list[RdpCandidate]:
    triples, _ = build_candidates()
    match = r_matcher(args.R)
    out = []
    for c in triples:
        if args.p is not None and c.p != args.p:
            continue
        if getattr(args, "n", None) is not None and c.n != args.n:
            continue
        if match(c.r):
            out.append(c)
    return out


# ---------------------------------------------------------------------------
# RDP classification


def _rdp_task(job) -> dict:
    c, node_budget, time_budget, mode = job
    res = classify_candidate(c, node_budget, time_budget, first_only=(mode == "exists"))
    d = res.to_json()
    d["mode"] = mode
    return d


def _usable(doc: dict | None, mode: str) -> bool:
    if doc is None or doc["status"] == "undecided":
        return False
    if mode == "full":
        return doc.get("mode") == "full"
    return True


def run_rdp(cands: Iterable[RdpCandidate], cache: ResultCache, workers: int = 1,
            node_budget: int | None = None, time_budget: float | None = None,
            mode: str = "full", progress: bool = False) -> list[dict]:
    """Classify candidates, reusing cached results; returns result documents in input order.

    ``mode="exists"`` stops each search at its first witness; such results
    carry status ``"exists"`` and a possibly partial sigma list.
    """
    cands = list(cands)
    docs: dict[str, dict] = {}
    todo = []
    for c in cands:
        doc = cache.get("rdp", c.key())
        if _usable(doc, mode):
            docs[c.key()] = doc
        else:
            todo.append((c, node_budget, time_budget, mode))
    if todo:
        if workers > 1:
            with Pool(workers) as pool:
                it = pool.imap_unordered(_rdp_task, todo)
                for i, d in enumerate(it):
                    key = f"{d['R']}/{d['n']}/{d['p']}"
                    cache.put("rdp", key, d)
                    docs[key] = d
                    if progress:
                        log.info("%d/%d %s %s %s", i + 1, len(todo), key, d["sigmas"], d["status"])
        else:
            for i, job in enumerate(todo):
                d = _rdp_task(job)
                key = job[0].key()
                cache.put("rdp", key, d)
                docs[key] = d
                if progress:
                    log.info("%d/%d %s %s %s", i + 1, len(todo), key, d["sigmas"], d["status"])
    return [docs[c.key()] for c in cands]


def _doc_result(doc: dict) -> RdpResult:
    return RdpResult.from_json(doc)


def rdp_report(docs: Iterable[dict], fmt: str, sigma: int | None = None) -> str:
    rows = []
    for d in docs:
        if sigma is not None and sigma not in d["sigmas"]:
            continue
        rows.append(d)
    rows.sort(key=lambda d: (-d["p"], parse_ade(d["R"]).symbols, d["n"]))
    if fmt == "json":
        return json.dumps(rows, sort_keys=True, indent=1) + "\n"
    lines = ["R\tn\tp\tsigma_list\tstatus"]
    for d in rows:
        lines.append(f"{d['R']}\t{d['n']}\t{d['p']}\t{','.join(map(str, d['sigmas']))}\t{d['status']}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Elliptic classification


def script_e_scope(cache: ResultCache, workers: int, node_budget, time_budget,
                   progress: bool = False) -> tuple[list[AdeType], list[AdeType], dict[AdeType, list[int]]]:
    """Members of the rank-20 list, undecided types, and the primes to search per member.

    A prime is searched when (R + A_1, 2, p) is realizable or undecided.
    """
    triples, _ = build_candidates()
    cands = [c for c in triples if c.n == 2 and c.r.count(("A", 1)) and pruning_reason(c) is None]
    docs = run_rdp(cands, cache, workers, node_budget, time_budget, mode="exists", progress=progress)
    results = [_doc_result(d) for d in docs]
    members, undecided = script_e(results)
    primes: dict[AdeType, list[int]] = {}
    for res in results:
        if res.sigmas or res.status == "undecided":
            primes.setdefault(res.candidate.r, []).append(res.candidate.p)
    by20 = {}
    for m in members:
        by20[m] = sorted(set(primes.get(add_a1(m), [])))
    return members, undecided, by20


def _ell_task(job) -> dict:
    r, p, node_budget, time_budget = job
    rows, complete = elliptic_classify(r, p, node_budget, time_budget)
    return {"R": format_ade(r), "p": p, "rows": [row.to_json() for row in rows],
            "status": "complete" if complete else "undecided"}


def run_elliptic(tasks: list[tuple[AdeType, int]], cache: ResultCache, workers: int,
                 node_budget, time_budget, progress: bool = False) -> list[dict]:
    docs: dict[str, dict] = {}
    todo = []
    for r, p in tasks:
        key = f"{format_ade(r)}/{p}"
        doc = cache.get("elliptic", key)
        if doc is not None and doc["status"] == "complete":
            docs[key] = doc
        else:
            todo.append((r, p, node_budget, time_budget))
    def store(jobs):
        for i, d in enumerate(jobs):
            key = f"{d['R']}/{d['p']}"
            cache.put("elliptic", key, d)
            docs[key] = d
            if progress:
                log.info("%d/%d %s %s", i + 1, len(todo), key, d["status"])

    if workers > 1 and todo:
        with Pool(workers) as pool:
            store(pool.imap_unordered(_ell_task, todo))
    else:
        store(map(_ell_task, todo))
    return [docs[f"{format_ade(r)}/{p}"] for r, p in tasks]


def elliptic_report(docs: Iterable[dict], fmt: str) -> str:
    rows = []
    for d in docs:
        for row in d["rows"]:
            rows.append(EllipticResult.from_json(row))
    rows.sort(key=lambda e: (-e.p, e.r.symbols, e.sigma, e.mw))
    if fmt == "json":
        return json.dumps([e.to_json() for e in rows], sort_keys=True, indent=1) + "\n"
    lines = ["p\tR\tsigma\tMW\tquasi\tkodaira"]
    for e in rows:
        kod = ",".join(kodaira_annotate(e.r, e.p, e.quasi))
        lines.append(f"{e.p}\t{format_ade(e.r)}\t{e.sigma}\t{format_mw(e.mw)}\t{int(e.quasi)}\t{kod}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Commands


def cmd_candidates(args) -> int:
    triples, pairs = build_candidates()
    rep = prune(triples)
    summary = {"triples": len(triples), "pairs": len(pairs),
               "pruned_triples": len(rep.removed), "pruned_pairs": rep.removed_pairs}
    reasons = {c: why for c, why in rep.removed}
    out = []
    for c in _scope(args):
        out.append(f"{format_ade(c.r)}\t{c.n}\t{c.p}\t{reasons.get(c, 'kept')}")
    if args.list or args.p is not None or args.R:
        sys.stdout.write("R\tn\tp\tpruning\n" + "\n".join(out) + ("\n" if out else ""))
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    if args.strict and summary != EXPECTED:
        print(f"checkpoint mismatch: expected {EXPECTED}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_classify_rdp(args) -> int:
    cache = ResultCache(args.cache_dir)
    cands = _scope(args)
    if not cands:
        print("no candidates in scope", file=sys.stderr)
        return EXIT_ERROR
    docs = run_rdp(cands, cache, args.workers, args.node_budget, args.time_budget, args.mode, args.verbose)
    shown = docs if args.all else [d for d in docs if d["sigmas"] or d["status"] == "undecided"]
    sys.stdout.write(rdp_report(shown, args.format, args.sigma))
    und = [f"{d['R']}/{d['n']}/{d['p']}" for d in docs if d["status"] == "undecided"]
    if und:
        print("undecided: " + " ".join(und), file=sys.stderr)
        return EXIT_UNDECIDED
    return EXIT_OK


def cmd_classify_elliptic(args) -> int:
    cache = ResultCache(args.cache_dir)
    members, undecided, by20 = script_e_scope(cache, args.workers, args.node_budget, args.time_budget,
                                              args.verbose)
    print(f"script_E={len(members)} undecided={len(undecided)}", file=sys.stderr)
    match = r_matcher(args.R)
    tasks = [(r, p) for r in members if match(r) for p in by20[r] if args.p is None or p == args.p]
    docs = run_elliptic(tasks, cache, args.workers, args.node_budget, args.time_budget, args.verbose)
    sys.stdout.write(elliptic_report(docs, args.format))
    bad = [f"{d['R']}/{d['p']}" for d in docs if d["status"] != "complete"]
    if undecided:
        print("incomplete rank-20 list; undecided: " + " ".join(format_ade(r) for r in undecided),
              file=sys.stderr)
    if bad or undecided:
        if bad:
            print("undecided: " + " ".join(bad), file=sys.stderr)
        return EXIT_UNDECIDED
    return EXIT_OK


def verify_codes() -> list[str]:
    """Check every Table 2 subgroup; returns failure descriptions."""
    r = parse_ade("21A1")
    fails = []
    for sigma, codes in sorted(load_codes().items()):
        gens = [decode_code(c) for c in codes]
        rep = check_conditions(r, 2, 2, sigma, gens)
        if not rep.ok:
            fails.append(f"sigma={sigma}: {rep}")
    return fails


def cmd_verify(args) -> int:
    cache = ResultCache(args.cache_dir)
    table = args.table.upper()
    if table == "T2":
        fails = verify_codes()
        for f in fails:
            print(f)
        print(f"table2: {10 - len(fails)}/10 subgroups pass")
        return EXIT_ERROR if fails else EXIT_OK
    if table == "RDP":
        cands = [c for c in _scope(args)]
        absent, docs = [], []
        for c in cands:
            doc = cache.get("rdp", c.key())
            if doc is None or doc.get("mode") != "full":
                absent.append(c.key())
            else:
                docs.append(doc)
        if absent:
            print("missing cache entries: " + " ".join(absent), file=sys.stderr)
            return EXIT_ERROR
        computed = {(d["p"], d["R"], d["n"]): tuple(d["sigmas"]) for d in docs if d["sigmas"]}
        match = r_matcher(args.R)
        published = {k: v for k, v in rdp_map(load_rdp(), args.p).items() if match(parse_ade(k[1]))
                     and (args.n is None or k[2] == args.n)}
        und = [f"{d['R']}/{d['n']}/{d['p']}" for d in docs if d["status"] == "undecided"]
        return _finish_diff(diff_maps(computed, published), und)
    if table in ("QE", "E"):
        docs = []
        for path in cache.entries("elliptic"):
            d = json.loads(path.read_text())
            if d.get("schema") == SCHEMA and (args.p is None or d["p"] == args.p):
                docs.append(d)
        if not docs:
            print("missing cache entries: run classify-elliptic first", file=sys.stderr)
            return EXIT_ERROR
        rows = [EllipticResult.from_json(r) for d in docs for r in d["rows"]]
        match = r_matcher(args.R)
        rows = [e for e in rows if match(e.r)]
        und = [f"{d['R']}/{d['p']}" for d in docs if d["status"] != "complete"]
        if table == "QE":
            computed = {(e.p, format_ade(e.r), e.sigma): e.torsion_rank for e in rows if e.quasi}
            published = {k: v for k, v in qe_expanded(load_qe(), args.p).items() if match(parse_ade(k[1]))}
        else:
            computed = {(e.p, format_ade(e.r), e.sigma, tuple(e.mw)): True for e in rows if not e.quasi}
            published = {r.key(): True for r in load_e() if (args.p is None or r.p == args.p) and match(r.r)}
        return _finish_diff(diff_maps(computed, published), und)
    print(f"unknown table {args.table}", file=sys.stderr)
    return EXIT_ERROR


def _finish_diff(d, undecided: list[str]) -> int:
    for line in d.lines():
        print(line)
    print(f"missing={len(d.missing)} extra={len(d.extra)} mismatched={len(d.mismatched)} "
          f"undecided={len(undecided)}")
    if undecided:
        print("undecided: " + " ".join(undecided), file=sys.stderr)
        return EXIT_UNDECIDED
    return EXIT_OK if d.empty else EXIT_ERROR


def cmd_cache(args) -> int:
    cache = ResultCache(args.cache_dir)
    if args.action == "ls":
        for kind in ("rdp", "elliptic"):
            entries = cache.entries(kind)
            status: dict[str, int] = {}
            for path in entries:
                try:
                    st = json.loads(path.read_text()).get("status", "?")
                except json.JSONDecodeError:
                    st = "corrupt"
                status[st] = status.get(st, 0) + 1
            print(f"{kind}\t{len(entries)}\t" + " ".join(f"{k}={v}" for k, v in sorted(status.items())))
        return EXIT_OK
    removed = 0
    for kind in ("rdp", "elliptic"):
        for path in cache.entries(kind):
            try:
                doc = json.loads(path.read_text())
                keep = doc.get("schema") == SCHEMA and (args.keep_undecided or doc.get("status") != "undecided")
            except json.JSONDecodeError:
                keep = False
            if not keep:
                path.unlink()
                removed += 1
    print(f"removed={removed}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="k3glue", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, results=True):
        p.add_argument("--p", type=int, help="characteristic filter")
        p.add_argument("--R", help="ADE type, or a glob on its string form such as '*A1'")
        p.add_argument("--n", type=int, help="polarisation degree filter")
        if results:
            p.add_argument("--cache-dir", default=default_cache_dir())
            p.add_argument("--workers", type=_positive_int, default=1)
            p.add_argument("--node-budget", type=_positive_int)
            p.add_argument("--time-budget", type=_positive_float, help="seconds per candidate")
            p.add_argument("--format", choices=("tsv", "json"), default="tsv")

    p = sub.add_parser("candidates", help="list candidates and pruning counts")
    common(p, results=False)
    p.add_argument("--strict", action="store_true", help="fail unless the checkpoint counts match")
    p.add_argument("--list", action="store_true", help="print every candidate")
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("classify-rdp", help="classify RDP candidates")
    common(p)
    p.add_argument("--sigma", type=int, help="only report rows containing this sigma")
    p.add_argument("--mode", choices=("full", "exists"), default="full",
                   help="full sigma sets, or stop at the first witness")
    p.add_argument("--all", action="store_true", help="also report candidates with no sigma")
    p.set_defaults(func=cmd_classify_rdp)

    p = sub.add_parser("classify-elliptic", help="classify extremal (quasi-)elliptic fibrations")
    common(p)
    p.set_defaults(func=cmd_classify_elliptic)

    p = sub.add_parser("verify", help="diff cached results against a published table")
    common(p)
    p.add_argument("--table", required=True, choices=("RDP", "QE", "E", "T2", "rdp", "qe", "e", "t2"))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cache", help="inspect or clean the result cache")
    p.add_argument("action", choices=("ls", "gc"))
    p.add_argument("--cache-dir", default=default_cache_dir())
    p.add_argument("--keep-undecided", action="store_true")
    p.set_defaults(func=cmd_cache)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
