"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line
(visible even under output capture) before asserting."""

import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from farecfn.harness import CHECKS, Algo, CorpusTally, check_instance, run_bench, summarize
from farecfn.oracles import corpus
from farecfn.router import Query, Router, in_restricted, in_restricted_by_own_anchor, price_filter
from farecfn.synthetic import od_queries, zonal_fare_doc
from farecfn.document import fare_structure
from farecfn.tickets import CheckMode, check_monotonicity
from farecfn.timetable import close_footpaths, load_timetable

CORPUS_SIZE = 1000
CORPUS_MONO_TRIALS = 100  # per instance, 10^5 over the family
FAMILY_TRIALS = 100_000
EIGHT = 8 * 3600


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def tally():
    t = CorpusTally()
    for inst in corpus(CORPUS_SIZE):
        check_instance(inst, t, CHECKS, monotonicity_trials=CORPUS_MONO_TRIALS)
    return t


def _line(t, *checks):
    return ", ".join(f"{c} {t.checked.get(c, 0) - t.failed.get(c, 0)}/{t.checked.get(c, 0)}"
                     for c in checks)


def test_c1_oracle_equivalence(tally, report):
    ok = tally.checked.get("pareto", 0) >= 2 * CORPUS_SIZE and not tally.failed.get("pareto") \
        and not tally.failed.get("min_price")
    report(1, ok, f"{CORPUS_SIZE} instances; " + _line(tally, "pareto", "min_price"))


def test_c2_cross_oracle(tally, report):
    ok = tally.checked.get("dfa", 0) > 0 and not tally.failed.get("dfa")
    report(2, ok, "constant-time subset; " + _line(tally, "dfa"))


MDV_GOLDENS = [
    ("A", "L", "Z4"), ("A", "G", "Z2"), ("A", "C", "H"), ("H", "L", "L"),
    ("E", "F", "C1"), ("A", "B", "D_H"), ("I", "L", "D_L"), ("J", "M", "Z1"),
    ("E", "D", "Z1"), ("A", "D", "H"),
]


def test_c3_mdv_goldens(mdv, mdv_partition, report):
    router = Router(mdv, mdv_partition)
    got = {}
    for o, t, _ in MDV_GOLDENS:
        best = price_filter(router.mc_raptor(Query(o, t, EIGHT)).journeys)
        got[o, t] = min(best, key=lambda j: j.price).ticket if best else None
    jm = min(router.mc_raptor(Query("J", "M", EIGHT)).journeys, key=lambda j: j.price)
    via_162 = mdv.monoid.to_doc(jm.fare.weight)["zones"] == ["162"]
    bad = [(o, t, want, got[o, t]) for o, t, want in MDV_GOLDENS if got[o, t] != want]
    report(3, not bad and via_162,
           f"{len(MDV_GOLDENS) - len(bad)}/{len(MDV_GOLDENS)} goldens, J->M via 162: {via_162}"
           + (f", mismatches {bad}" if bad else ""))


def test_c4_partitions(fig4b, fig4c, mdv, mdv_partition, report):
    b = fig4b.fares.partition(CheckMode("exhaustive"))
    c = fig4c.fares.partition(CheckMode("exhaustive"))
    ok_b = b.full == {"B", "C", "D", "E"} and b.partial == {"A"}
    ok_c = c.none == {"A"}
    ok_m = mdv_partition.full == set(mdv.graph.ids)
    prov = set(mdv_partition.provenance.values())
    ok_p = prov == {"proved_sampled(100000)"}
    report(4, ok_b and ok_c and ok_m and ok_p,
           f"fig4b {ok_b}, fig4c {ok_c}, MDV C_F = T {ok_m} with provenance {sorted(prov)}")


def test_c5_monotonicity(mdv, mdv_partition, fig4b, fig4c, fig5, data_dir, tally, report):
    from farecfn.document import load_fare_document
    results = {}
    for fss in (False, True):
        for name, ftt in (("fig4b", fig4b), ("fig4c", fig4c), ("fig5", fig5)):
            rep = check_monotonicity(ftt.graph, ftt.fares.partition(), CheckMode("exhaustive"), fss)
            results[f"{name} exhaustive fss={fss}"] = rep
        fig6 = load_fare_document(data_dir / "fig6" / "fare.yaml")
        results[f"fig6 exhaustive fss={fss}"] = check_monotonicity(
            fig6.graph, fig6.partition(), CheckMode("exhaustive"), fss)
        results[f"mdv sampled fss={fss}"] = check_monotonicity(
            mdv.graph, mdv_partition, CheckMode("sampled", FAMILY_TRIALS, 5), fss)
        zonal = fare_structure(zonal_fare_doc([str(i) for i in range(1, 6)]))
        results[f"zonal sampled fss={fss}"] = check_monotonicity(
            zonal.graph, zonal.partition(), CheckMode("sampled", FAMILY_TRIALS, 6), fss)
    bad = [k for k, r in results.items() if not r.holds]
    corpus_ok = not tally.failed.get("monotonicity")
    report(5, not bad and corpus_ok,
           f"{len(results)} fixture sweeps clean: {not bad}; random corpus "
           f"{CORPUS_SIZE}x{CORPUS_MONO_TRIALS} trials: " + _line(tally, "monotonicity"))


def test_c6_pruning_soundness(fig5, tally, report):
    corpus_ok = all(not tally.failed.get(c) for c in ("tight", "anchors", "target"))
    r = Router(fig5)
    res = r.tight_bmrap(Query("S", "T", EIGHT, variant="tight_bmrap", slack_arr=1800, slack_tr=1))
    square = [j for j in res.journeys
              if in_restricted(j.arrival, j.trips, res.anchors, 1800, 1)
              and not in_restricted_by_own_anchor(j.arrival, j.trips, res.anchors, 1800, 1)]
    report(6, corpus_ok and bool(square),
           _line(tally, "tight", "anchors", "target")
           + f"; fig5 square-mark journeys: {len(square)}")


def test_c7_flag_transparency(tally, report):
    ok = tally.checked.get("flags", 0) > 0 and not tally.failed.get("flags")
    report(7, ok, "three flag combinations vs plain; " + _line(tally, "flags"))


def test_c8_effort_ordering(city, report):
    queries, _ = od_queries(city.ftt, 30, seed=0)
    labels = ["mcraptor", "mcraptor+ptp+fss",
              "tight_bmrap+ptp+fss@0/0", "tight_bmrap+ptp+fss@900/1", "tight_bmrap+ptp+fss@1800/2"]
    algos = [Algo.parse(a) for a in labels]
    rows = {r["algorithm"]: r for r in summarize(run_bench(city.ftt, queries, algos), algos)}
    plain, fast = rows["mcraptor"]["scans_avg"], rows["mcraptor+ptp+fss"]["scans_avg"]
    tight = [rows[a]["scans_avg"] for a in labels[2:]]
    ok = all(t < fast for t in tight) and fast < plain
    report(8, ok, f"mean #Scan plain {plain:.1f} > ptp+fss {fast:.1f} > tight "
                  + "/".join(f"{t:.1f}" for t in tight) + " (slack 0/900/1800)")


def test_c9_closure_unit(report):
    closed = set(close_footpaths([("a", "b", 2), ("b", "c", 3)]))
    report(9, ("a", "c", 5) in closed, "two-hop closure adds (a,c,5)")


def test_c9_public_feed(report):
    feed = os.environ.get("FARECFN_MDV_GTFS")
    if not feed or not Path(feed).is_dir():
        pytest.skip("public MDV feed not available; set FARECFN_MDV_GTFS to a converted dataset")
    raw = load_timetable(feed, close=False)
    closed = load_timetable(feed)
    report(9, (len(raw.footpaths), len(closed.footpaths)) == (845, 1029),
           f"footpaths {len(raw.footpaths)} -> {len(closed.footpaths)}")
