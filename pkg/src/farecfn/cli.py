"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 capability
error (an operation the input does not support).
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
import time
from importlib import resources
from pathlib import Path

import yaml

from .document import InvalidDocument, fare_structure, read_document, validate_cfn
from .harness import (
    CHECKS,
    DEFAULT_MATRIX,
    Algo,
    BenchConfig,
    CorpusTally,
    check_instance,
    run_bench,
    summarize,
)
from .monoid import CapabilityError, StructuralError
from .oracles import corpus
from .router import VARIANTS, Query, Router, price_filter
from .synthetic import CityParams, od_queries, synthetic_city
from .tickets import CheckMode, check_no_overtaking, format_price, partition_consistency
from .timetable import TimetableError, find_fare_document, load_dataset, load_timetable, prepare

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_CAPABILITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- argument helpers ----------------------------------------------------

def parse_clock(text: str) -> int:
    """``HH:MM[:SS]`` or plain seconds."""
    if re.fullmatch(r"\d+", text):
        return int(text)
    m = re.fullmatch(r"(\d{1,2}):(\d{2})(?::(\d{2}))?", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad time {text!r}; use HH:MM[:SS] or seconds")
    return int(m.group(1)) * 3600 + int(m.group(2)) * 60 + int(m.group(3) or 0)


def parse_duration(text: str) -> int:
    """Seconds, optionally suffixed with ``s``, ``m`` or ``h``."""
    m = re.fullmatch(r"(\d+)([smh]?)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}; e.g. 900, 900s, 15m, 1h")
    return int(m.group(1)) * {"": 1, "s": 1, "m": 60, "h": 3600}[m.group(2)]


def parse_window(text: str) -> tuple[int, int]:
    a, sep, b = text.partition("-")
    if not sep:
        raise argparse.ArgumentTypeError(f"bad window {text!r}; use HH:MM-HH:MM")
    return parse_clock(a), parse_clock(b)


def clock(t: float) -> str:
    t = int(t)
    return f"{t // 3600:02d}:{t % 3600 // 60:02d}:{t % 60:02d}"


def bundled(name: str) -> Path | None:
    p = resources.files("farecfn") / "data" / name
    return Path(str(p)) if p.is_dir() else None


def resolve_path(text: str) -> Path:
    """An existing path, or the name of a bundled fixture."""
    p = Path(text)
    if p.exists():
        return p
    b = bundled(text)
    if b is None:
        raise UsageError(f"no such file, directory or bundled fixture: {text!r}")
    return b


def check_mode(args) -> CheckMode:
    return CheckMode(args.check, args.trials, args.check_seed)


# -- output ----------------------------------------------------------------

def emit(fmt: str, doc, rows: list[dict], text: str, out=None, header: list[str] = ()):
    out = out or sys.stdout
    if fmt == "structured":
        out.write(yaml.safe_dump(doc, sort_keys=False, allow_unicode=True))
    elif fmt == "csv":
        for h in header:
            out.write(f"# {h}\n")
        if rows:
            w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    else:
        out.write(text if text.endswith("\n") else text + "\n")


def aligned(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)\n"
    cols = list(rows[0])
    cells = [[str(c) for c in cols]] + [[_cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    right = [all(isinstance(r[c], (int, float)) for r in rows) for c in cols]
    return "".join("  ".join(v.rjust(w) if rj else v.ljust(w)
                             for v, w, rj in zip(row, widths, right)).rstrip() + "\n"
                   for row in cells)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


# -- validate --------------------------------------------------------------

def _partition_doc(fares, part) -> dict:
    ids = list(fares.graph.ids)
    return {
        "full": sorted(part.full), "partial": sorted(part.partial), "none": sorted(part.none),
        "tickets": {t: {"class": part.class_of(t), "provenance": part.provenance.get(t, ""),
                        "evidence": part.evidence.get(t, "")} for t in ids},
    }


def _summary_line(ids, part) -> str:
    def show(name, s):
        if s and len(s) == len(ids):
            return f"{name} = all {len(ids)} tickets"
        return f"{name} = {{{', '.join(sorted(s))}}}"
    return "; ".join(show(n, s) for n, s in (("C_F", part.full), ("C_P", part.partial),
                                              ("C_N", part.none)))


def validate_one(path: Path, mode: CheckMode) -> dict:
    rec = {"path": str(path), "valid": False, "errors": [], "warnings": []}
    tt = None
    if path.is_dir():
        try:
            doc_path = find_fare_document(path)
        except TimetableError as exc:
            rec["errors"].append({"code": "missing_fare_document", "message": str(exc)})
            return rec
        if (path / "stops.csv").exists():
            try:
                tt = load_timetable(path)
            except TimetableError as exc:
                rec["errors"].append({"code": "timetable", "message": str(exc),
                                      "file": exc.file, "line": exc.line})
    else:
        doc_path = path
    try:
        doc = read_document(doc_path)
    except (yaml.YAMLError, ValueError) as exc:
        rec["errors"].append({"code": "unreadable", "message": str(exc)})
        return rec
    report = validate_cfn(doc)
    rec["errors"] += report.errors
    rec["warnings"] += report.warnings
    if rec["errors"]:
        return rec
    fares = fare_structure(doc)
    if tt is not None:
        try:
            ftt = prepare(tt, fares)
        except StructuralError as exc:
            rec["errors"].append({"code": "annotation", "message": str(exc)})
            return rec
        rec["timetable"] = {"stops": len(ftt.stops), "routes": len(ftt.routes),
                            "trips": sum(len(r.trip_ids) for r in ftt.routes),
                            "footpaths": len(tt.footpaths)}
    part = fares.partition(mode)
    for t in partition_consistency(fares.graph, part):
        rec["warnings"].append({"code": "partition_leak",
                                "message": f"{t} is in C_F but reaches tickets outside it"})
    rec["tickets"] = len(fares.graph.ids)
    rec["partition"] = _partition_doc(fares, part)
    rec["summary"] = _summary_line(fares.graph.ids, part)
    rec["valid"] = True
    return rec


def cmd_validate(args) -> int:
    mode = check_mode(args)
    recs = [validate_one(resolve_path(p), mode) for p in args.paths]
    lines, rows = [], []
    for r in recs:
        lines.append(f"{r['path']}: {'valid' if r['valid'] else 'INVALID'}")
        if "timetable" in r:
            t = r["timetable"]
            lines.append(f"  timetable: {t['stops']} stops, {t['routes']} routes, "
                         f"{t['trips']} trips, {t['footpaths']} footpaths")
        if r["valid"]:
            lines.append(f"  {r['summary']}")
            for t, d in r["partition"]["tickets"].items():
                lines.append(f"    {t:<8} {d['class']:<8} {d['provenance']:<24} {d['evidence']}")
        for e in r["errors"]:
            lines.append(f"  error [{e['code']}]: {e['message']}")
        for w in r["warnings"]:
            lines.append(f"  warning [{w['code']}]: {w['message']}")
        rows.append({"path": r["path"], "valid": r["valid"], "summary": r.get("summary", ""),
                     "errors": "; ".join(e["message"] for e in r["errors"])})
    emit(args.format, {"results": recs}, rows, "\n".join(lines))
    return EXIT_OK if all(r["valid"] for r in recs) else EXIT_INVALID


# -- partition -------------------------------------------------------------

def _load_fares(path: Path):
    doc = read_document(find_fare_document(path) if path.is_dir() else path)
    return fare_structure(doc)


def cmd_partition(args) -> int:
    fares = _load_fares(resolve_path(args.path))
    mode = check_mode(args)
    part = fares.partition(mode)
    g = fares.graph
    rows = []
    for t in g.ids:
        row = {"ticket": t, "price": format_price(g.prices[g.index[t]]),
               "class": part.class_of(t), "provenance": part.provenance.get(t, ""),
               "evidence": part.evidence.get(t, "")}
        if args.witness:
            w = None if part.class_of(t) == "full" else check_no_overtaking(g, t, mode).witness
            row["witness"] = "" if w is None else (
                f"{w.k}/{w.l} h={g.monoid.format(w.h)} h_bar={g.monoid.format(w.h_bar)} "
                f"s={w.event} -> {w.got_k}, {w.got_l}")
        rows.append(row)
    doc = {"mode": mode.resolve(g.monoid).kind, "trials": mode.trials, "seed": mode.seed,
           **_partition_doc(fares, part)}
    if args.witness:
        for r in rows:
            if r["witness"]:
                doc["tickets"][r["ticket"]]["witness"] = r["witness"]
    text = _summary_line(g.ids, part) + "\n" + aligned(rows)
    emit(args.format, doc, rows, text)
    return EXIT_OK


# -- query -----------------------------------------------------------------

def _leg_summary(j) -> str:
    parts = [j.origin]
    for leg in j.legs:
        parts.append(f"-[{leg.route or 'walk'}]-> {leg.to_stop}")
    return " ".join(parts)


def cmd_query(args) -> int:
    ftt = load_dataset(resolve_path(args.dataset))
    for s in (args.origin, args.target):
        try:
            ftt.stop_index(s)
        except KeyError:
            raise UsageError(f"unknown stop {s!r}") from None
    part = ftt.fares.partition(check_mode(args))
    q = Query(args.origin, args.target, args.time, args.max_rounds, args.ptp, args.fss,
              args.variant, args.slack_arr, args.slack_tr)
    res = Router(ftt, part).route(q)
    journeys = res.journeys if args.all else price_filter(res.journeys)
    m = ftt.monoid
    doc = {
        "query": {"origin": q.origin, "target": q.target, "departure": clock(q.departure),
                  "variant": q.variant, "ptp": q.ptp, "fss": q.fss, "slack_arr": q.slack_arr,
                  "slack_tr": q.slack_tr, "max_rounds": q.max_rounds},
        "anchors": [{"arrival": clock(a), "trips": k} for a, k in res.anchors],
        "stats": {"scans": res.stats.scans, "rounds": res.stats.rounds,
                  "stage_scans": dict(res.stats.stage_scans)},
        "journeys": [],
    }
    rows = []
    for n, j in enumerate(journeys):
        d = j.to_dict(m)
        d["arrival"] = clock(j.arrival)
        for leg in d["legs"]:
            leg["dep"], leg["arr"] = clock(leg["dep"]), clock(leg["arr"])
        doc["journeys"].append(d)
        rows.append({"n": n, "arrival": clock(j.arrival), "trips": j.trips, "ticket": j.ticket,
                     "price": format_price(j.price), "path": _leg_summary(j)})
    head = (f"{q.origin} -> {q.target} at {clock(q.departure)} via {q.variant}"
            f" (ptp={q.ptp}, fss={q.fss}, slack={q.slack_arr}s/{q.slack_tr})\n"
            f"{len(journeys)} journeys, {res.stats.scans} route scans, {res.stats.rounds} rounds\n")
    text = head
    for j, d in zip(journeys, doc["journeys"]):
        text += f"\n{clock(j.arrival)}  {j.trips} trips  {j.ticket} {format_price(j.price)}\n"
        for leg in d["legs"]:
            via = f" {leg['route']} {leg['trip']}" if leg["kind"] == "ride" else " walk"
            text += (f"    {leg['dep']} {leg['from']} -> {leg['arr']} {leg['to']}{via}"
                     f"  [{leg['fare']['ticket']}]\n")
    emit(args.format, doc, rows, text)
    return EXIT_OK


# -- bench -----------------------------------------------------------------

def _city_ftt(seed: int):
    return synthetic_city(CityParams(seed=seed)).ftt


def cmd_bench(args) -> int:
    cfg = BenchConfig(pairs=args.pairs, seed=args.seed, window=args.window,
                      algos=tuple(args.algo or [Algo.parse(a) for a in DEFAULT_MATRIX]),
                      max_rounds=args.max_rounds, workers=args.workers)
    if (args.dataset is None) == (args.synthetic is None):
        raise UsageError("give exactly one of DATASET or --synthetic SEED")
    if args.synthetic is not None:
        ftt = _city_ftt(args.synthetic)
        source, factory, fargs = f"synthetic city seed={args.synthetic}", _city_ftt, (args.synthetic,)
    else:
        path = resolve_path(args.dataset)
        ftt = load_dataset(path)
        source, factory, fargs = str(path), load_dataset, (str(path),)
    queries, dropped = od_queries(ftt, cfg.pairs, cfg.seed, cfg.window, max_rounds=cfg.max_rounds)
    t0 = time.perf_counter()
    part = ftt.fares.partition(check_mode(args))
    records = run_bench(ftt, queries, cfg.algos, cfg.workers, factory, fargs, part)
    wall = time.perf_counter() - t0
    rows = summarize(records, cfg.algos)
    if args.no_timing:
        for r in rows:
            r.pop("time_ms_avg")
            r.pop("time_ms_sd")
    header = [f"source: {source}", f"od_seed: {cfg.seed}", f"pairs: {len(queries)}",
              f"dropped_unconnected: {dropped}",
              f"window: {clock(cfg.window[0])}-{clock(cfg.window[1])}"]
    doc = {"source": source, "od_seed": cfg.seed, "pairs": len(queries),
           "dropped_unconnected": dropped, "window": [clock(w) for w in cfg.window],
           "rows": rows}
    if args.records:
        doc["records"] = [{"algorithm": r.algo, "origin": r.origin, "target": r.target,
                           "departure": clock(r.departure), "scans": r.scans, "rounds": r.rounds,
                           "journeys": r.journeys, "price_optimal": r.price_optimal,
                           "stage_scans": r.stage_scans,
                           **({} if args.no_timing else {"time_ms": round(r.time_ms, 3)})}
                          for r in records]
    if not args.no_timing:
        doc["wall_s"] = round(wall, 3)
    text = "".join(f"# {h}\n" for h in header) + aligned(rows)
    emit(args.format, doc, rows, text, header=header)
    return EXIT_OK


# -- oracle corpus ---------------------------------------------------------

def cmd_oracle_corpus(args) -> int:
    checks = tuple(args.checks) if args.checks else CHECKS
    tally = CorpusTally()
    t0 = time.perf_counter()
    kw = {"max_stops": args.max_stops, "max_routes": args.max_routes}
    for inst in corpus(args.instances, args.seed, **kw):
        check_instance(inst, tally, checks, args.monotonicity_trials)
        if args.write:
            from .timetable import write_dataset
            write_dataset(Path(args.write) / f"instance_{inst.params.seed:05d}", inst.timetable,
                          inst.fare_doc, inst.raw_footpaths)
    rows = [{"check": c, "checked": n, "failed": tally.failed.get(c, 0),
             "status": "PASS" if not tally.failed.get(c) else "FAIL"}
            for c, n in tally.checked.items()]
    doc = {"instances": args.instances, "seed": args.seed, "checks": rows,
           "examples": [{"check": c, "detail": repr(d)} for c, d in tally.examples],
           "seconds": round(time.perf_counter() - t0, 1)}
    text = (f"# {args.instances} instances from seed {args.seed}\n" + aligned(rows)
            + "".join(f"  {c}: {d!r}\n" for c, d in tally.examples[:5]))
    emit(args.format, doc, rows, text)
    return EXIT_OK if tally.ok else EXIT_INVALID


# -- parser ----------------------------------------------------------------

def _add_check(p):
    p.add_argument("--check", choices=("auto", "exhaustive", "sampled"), default="auto",
                   help="no-overtaking decision mode (default: exhaustive when the monoid is finite)")
    p.add_argument("--trials", type=int, default=100_000, help="sampled-mode trials")
    p.add_argument("--check-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="farecfn", description=__doc__.splitlines()[0])
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("text", "csv", "structured"), default="text")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[fmt], help="validate datasets or fare documents")
    p.add_argument("paths", nargs="+", help="dataset directories, fare documents or fixture names")
    _add_check(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("partition", parents=[fmt], help="comparability partition with evidence")
    p.add_argument("path")
    p.add_argument("--witness", action="store_true",
                   help="show a no-overtaking counterexample for tickets outside C_F")
    _add_check(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("query", parents=[fmt], help="answer one query")
    p.add_argument("dataset")
    p.add_argument("origin")
    p.add_argument("target")
    p.add_argument("--time", type=parse_clock, default=8 * 3600, help="departure, HH:MM[:SS]")
    p.add_argument("--variant", choices=VARIANTS, default="mcraptor")
    p.add_argument("--slack-arr", type=parse_duration, default=0)
    p.add_argument("--slack-tr", type=int, default=0)
    p.add_argument("--ptp", action="store_true")
    p.add_argument("--fss", action="store_true")
    p.add_argument("--max-rounds", type=int, default=25)
    p.add_argument("--all", action="store_true", help="all state-optimal journeys, not just price-optimal")
    _add_check(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", parents=[fmt], help="batch statistics over random OD pairs")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--synthetic", type=int, metavar="SEED", help="use the synthetic city for SEED")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="OD sampling seed")
    p.add_argument("--window", type=parse_window, default=(7 * 3600, 8 * 3600))
    p.add_argument("--algo", type=Algo.parse, action="append",
                   help="variant[+ptp][+fss][@arr/tr]; repeatable")
    p.add_argument("--max-rounds", type=int, default=25)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--records", action="store_true", help="include per-query records (structured)")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock columns")
    _add_check(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-corpus", parents=[fmt], help="check the router against the oracles")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-stops", type=int, default=10)
    p.add_argument("--max-routes", type=int, default=6)
    p.add_argument("--checks", nargs="+", choices=CHECKS)
    p.add_argument("--monotonicity-trials", type=int, default=1000)
    p.add_argument("--write", metavar="DIR", help="also serialize every instance under DIR")
    p.set_defaults(func=cmd_oracle_corpus)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"farecfn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapabilityError as exc:
        print(f"farecfn: capability: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (InvalidDocument, TimetableError, StructuralError) as exc:
        print(f"farecfn: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
