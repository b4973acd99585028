"""Batch benchmarking and corpus checking, shared by the CLI and the tests."""

from __future__ import annotations

import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .oracles import (
    Instance,
    constant_profile,
    dfa_product_dijkstra,
    enumerate_outcomes,
    pareto,
    project_arrival_price,
)
from .monoid import CapabilityError
from .router import Query, Router, in_restricted, pareto_keys, price_filter, raptor
from .tickets import CheckMode, check_monotonicity
from .timetable import FareTimetable

SLACK_GRID = ((0, 0), (900, 1), (1800, 2))
FLAG_GRID = ((False, False), (True, False), (False, True), (True, True))


@dataclass(frozen=True)
class Algo:
    """One row of the algorithm matrix: ``variant[+ptp][+fss][@arr/tr]``."""

    variant: str = "mcraptor"
    ptp: bool = False
    fss: bool = False
    slack_arr: int = 0
    slack_tr: int = 0

    @classmethod
    def parse(cls, text: str) -> "Algo":
        m = re.fullmatch(r"([a-z_]+)((?:\+(?:ptp|fss))*)(?:@(\d+)/(\d+))?", text.strip())
        if not m:
            raise ValueError(f"bad algorithm spec {text!r}; expected variant[+ptp][+fss][@arr/tr]")
        flags = set(filter(None, m.group(2).split("+")))
        algo = cls(m.group(1), "ptp" in flags, "fss" in flags,
                   int(m.group(3) or 0), int(m.group(4) or 0))
        Query("x", "y", 0, variant=algo.variant)  # validates the variant name
        return algo

    @property
    def label(self) -> str:
        s = self.variant + "".join(f"+{f}" for f, on in (("ptp", self.ptp), ("fss", self.fss)) if on)
        if self.variant != "mcraptor":
            s += f"@{self.slack_arr}/{self.slack_tr}"
        return s

    def apply(self, q: Query) -> Query:
        return replace(q, variant=self.variant, ptp=self.ptp, fss=self.fss,
                       slack_arr=self.slack_arr, slack_tr=self.slack_tr)


DEFAULT_MATRIX = (
    "mcraptor", "mcraptor+ptp", "mcraptor+ptp+fss",
    "target_bmrap+ptp+fss@0/0", "target_bmrap+ptp+fss@900/1",
    "tight_bmrap+ptp+fss@0/0", "tight_bmrap+ptp+fss@900/1", "tight_bmrap+ptp+fss@1800/2",
)


@dataclass
class BenchConfig:
    pairs: int = 100
    seed: int = 0
    window: tuple[int, int] = (7 * 3600, 8 * 3600)
    algos: tuple[Algo, ...] = tuple(Algo.parse(a) for a in DEFAULT_MATRIX)
    max_rounds: int = 25
    workers: int = 1


@dataclass
class Record:
    algo: str
    origin: str
    target: str
    departure: int
    scans: int
    rounds: int
    journeys: int
    price_optimal: int
    time_ms: float
    stage_scans: dict = field(default_factory=dict)
    keys: tuple = ()


COLUMNS = ("scans", "time_ms", "rounds", "journeys", "price_optimal")


def run_query(router: Router, q: Query, algo: Algo) -> Record:
    qq = algo.apply(q)
    t0 = time.perf_counter()
    res = router.route(qq)
    ms = (time.perf_counter() - t0) * 1000
    best = price_filter(res.journeys)
    return Record(algo.label, q.origin, q.target, q.departure, res.stats.scans, res.stats.rounds,
                  len(res.journeys), len(best), ms, dict(res.stats.stage_scans),
                  tuple(sorted((j.arrival, j.trips, str(j.price)) for j in best)))


_WORKER: dict = {}


def _init_worker(factory, args, partition):
    _WORKER["router"] = Router(factory(*args), partition)


def _work(job):
    q, algo = job
    return run_query(_WORKER["router"], q, algo)


def run_bench(ftt: FareTimetable, queries: list[Query], algos, workers: int = 1,
              factory=None, factory_args=(), partition=None) -> list[Record]:
    """Every query under every algorithm, in matrix-major order.

    With ``workers > 1`` each worker rebuilds the timetable by calling
    ``factory(*factory_args)``, which must be a picklable top-level callable.
    """
    jobs = [(q, a) for a in algos for q in queries]
    router = Router(ftt, partition)
    if workers <= 1 or factory is None:
        return [run_query(router, q, a) for q, a in jobs]
    with ProcessPoolExecutor(workers, initializer=_init_worker,
                             initargs=(factory, factory_args, router.partition)) as ex:
        return list(ex.map(_work, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def summarize(records: list[Record], algos) -> list[dict]:
    """Mean and population standard deviation per algorithm and column."""
    rows = []
    for a in algos:
        rs = [r for r in records if r.algo == a.label]
        row = {"algorithm": a.label, "ptp": a.ptp, "fss": a.fss,
               "slack_arr": a.slack_arr, "slack_tr": a.slack_tr, "n": len(rs)}
        for col in COLUMNS:
            v = np.array([getattr(r, col) for r in rs], dtype=float)
            row[f"{col}_avg"] = float(v.mean()) if len(v) else float("nan")
            row[f"{col}_sd"] = float(v.std()) if len(v) else float("nan")
        rows.append(row)
    return rows


# -- corpus checks -------------------------------------------------------

@dataclass
class CorpusTally:
    checked: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    examples: list = field(default_factory=list)

    def note(self, check: str, ok: bool, detail=None):
        self.checked[check] = self.checked.get(check, 0) + 1
        if not ok:
            self.failed[check] = self.failed.get(check, 0) + 1
            if len(self.examples) < 20:
                self.examples.append((check, detail))

    @property
    def ok(self) -> bool:
        return not any(self.failed.values())


CHECKS = ("pareto", "dfa", "pruning", "flags", "monotonicity")


def check_instance(inst: Instance, tally: CorpusTally, checks=CHECKS,
                   monotonicity_trials: int = 1000) -> None:
    ftt = inst.ftt
    part = inst.fares.partition(CheckMode("exhaustive") if ftt.monoid.finite else CheckMode())
    router = Router(ftt, part)
    seed = inst.params.seed
    if "monotonicity" in checks:
        rep = check_monotonicity(ftt.graph, part, CheckMode("sampled", monotonicity_trials, seed))
        tally.note("monotonicity", rep.holds, (seed, rep.violations[:1]))
    constant = False
    if "dfa" in checks and inst.params.constant_time and ftt.monoid.finite:
        try:
            constant_profile(ftt)
            constant = True
        except CapabilityError:
            pass
    for q in inst.queries:
        o, t = ftt.stop_index(q.origin), ftt.stop_index(q.target)
        base = router.mc_raptor(q)
        got = pareto_keys(price_filter(base.journeys))
        if "pareto" in checks:
            outcomes = enumerate_outcomes(ftt, o, t, q.departure, q.max_rounds)
            want = {x.key for x in pareto(outcomes, key=lambda x: x.key)}
            tally.note("pareto", got == want, (seed, q, sorted(want), sorted(got)))
            if outcomes:
                best = min(x.price for x in outcomes)
                ok = bool(base.journeys) and min(j.price for j in base.journeys) == best
                tally.note("min_price", ok, (seed, q))
        if constant:
            full = enumerate_outcomes(ftt, o, t, q.departure, 25)
            frontier = dfa_product_dijkstra(ftt, o, t, q.departure).frontier
            want = project_arrival_price(full)
            tally.note("dfa", sorted(frontier) == sorted(want), (seed, q, want, frontier))
        if "flags" in checks:
            for ptp, fss in FLAG_GRID[1:]:
                other = router.mc_raptor(replace(q, ptp=ptp, fss=fss))
                tally.note("flags", pareto_keys(price_filter(other.journeys)) == got,
                           (seed, q, ptp, fss))
        if "pruning" in checks:
            rr = raptor(ftt, o, t, q.departure, q.max_rounds)
            for sa, st in SLACK_GRID:
                tight = router.tight_bmrap(replace(q, variant="tight_bmrap", slack_arr=sa, slack_tr=st))
                want = pareto_keys([j for j in base.journeys
                                    if in_restricted(j.arrival, j.trips, rr.anchors, sa, st)])
                tally.note("tight", pareto_keys(tight.journeys) == want, (seed, q, sa, st))
                have = {(j.arrival, j.trips) for j in tight.journeys}
                tally.note("anchors", set(rr.anchors) <= have, (seed, q, sa, st))
                tally.note("effort", tight.stats.scans <= base.stats.scans, (seed, q, sa, st))
                target = router.target_bmrap(replace(q, variant="target_bmrap", slack_arr=sa,
                                                     slack_tr=st))
                want = pareto_keys([j for j in base.journeys
                                    if j.arrival <= rr.target_bound(t, j.trips) + sa])
                tally.note("target", pareto_keys(target.journeys) == want, (seed, q, sa, st))
