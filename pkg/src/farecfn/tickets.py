"""Ticket graphs: guarded transitions, fare updates, comparability and dominance."""

from __future__ import annotations

import enum
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .guards import Guard, compile_guard, parse_guard
from .monoid import CapabilityError, MonoidSpec, MonoidValue, StructuralError


def as_price(x) -> Fraction:
    """Parse a price given as int, decimal string or Fraction."""
    if isinstance(x, float):
        x = repr(x)
    p = Fraction(x)
    if p < 0:
        raise StructuralError(f"negative price {x!r}")
    return p


def format_price(p: Fraction) -> str:
    """Decimal rendering for terminating fractions, ``a/b`` otherwise."""
    p = Fraction(p)
    d = p.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return str(p)
    digits = 0
    while (p * 10 ** digits).denominator != 1:
        digits += 1
    digits = max(digits, 2) if p.denominator != 1 else 0
    return f"{float(p):.{digits}f}" if digits else str(p.numerator)


@dataclass(frozen=True)
class Ticket:
    id: str
    price: Fraction
    fss_ignore: frozenset = frozenset()


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    priority: int
    guard: Guard


@dataclass(frozen=True)
class FareState:
    ticket: str
    weight: MonoidValue


class Dominance(enum.Enum):
    STRICT = "dominates_strictly"
    EQUAL = "dominates_or_equal"
    NONE = "incomparable"


class TicketGraph:
    """Tickets, prioritized guarded edges and precomputed reachability.

    Structural problems (unknown ids or components) raise immediately;
    semantic checks such as acyclicity live in :func:`validate_graph`.
    """

    def __init__(self, monoid: MonoidSpec, tickets: Sequence[Ticket], edges: Sequence[Edge],
                 events: Sequence[str], noop_event: str = "s0"):
        self.monoid = monoid
        self.tickets = tuple(tickets)
        self.events = tuple(events)
        self.noop_event = noop_event
        self.ids = tuple(t.id for t in self.tickets)
        if len(set(self.ids)) != len(self.ids):
            raise StructuralError("duplicate ticket ids")
        self.index = {t: i for i, t in enumerate(self.ids)}
        if noop_event not in self.events:
            raise StructuralError(f"no-op event {noop_event!r} is not declared")
        for t in self.tickets:
            for name in t.fss_ignore:
                monoid.index(name)
        self.edges = tuple(edges)
        out: dict[int, list] = defaultdict(list)
        for e in self.edges:
            if e.source not in self.index or e.target not in self.index:
                raise StructuralError(f"edge {e.source}->{e.target} references an unknown ticket")
            out[self.index[e.source]].append(e)
        self.out_edges = tuple(
            tuple(sorted(out.get(i, ()), key=lambda e: e.priority)) for i in range(len(self.ids))
        )
        self._compiled = tuple(
            tuple((compile_guard(e.guard, monoid), self.index[e.target]) for e in es)
            for es in self.out_edges
        )
        self.prices = tuple(t.price for t in self.tickets)
        self.reach_mask = self._reach_masks()
        keep = []
        for t in self.tickets:
            ignored = {monoid.index(n) for n in t.fss_ignore}
            keep.append(tuple(i for i in range(len(monoid.components)) if i not in ignored))
        self.fss_keep = tuple(keep)

    # -- lookup --------------------------------------------------------
    def ticket(self, tid: str) -> Ticket:
        try:
            return self.tickets[self.index[tid]]
        except KeyError:
            raise StructuralError(f"unknown ticket {tid!r}") from None

    def _reach_masks(self) -> tuple:
        n = len(self.ids)
        succ = [{self.index[e.target] for e in es} for es in self.out_edges]
        masks = [0] * n
        # iterative DFS; tolerates cycles so validation can report them
        for i in range(n):
            seen = 1 << i
            stack = [i]
            while stack:
                v = stack.pop()
                for w in succ[v]:
                    if not seen >> w & 1:
                        seen |= 1 << w
                        stack.append(w)
            masks[i] = seen
        return tuple(masks)

    def successors(self, tid: str) -> set[str]:
        return {e.target for e in self.out_edges[self.index[tid]]}

    def has_path(self, a: str, b: str) -> bool:
        return bool(self.reach_mask[self.index[a]] >> self.index[b] & 1)

    def mask_to_ids(self, mask: int) -> frozenset:
        return frozenset(t for i, t in enumerate(self.ids) if mask >> i & 1)

    # -- fast index-based kernels used by the router ------------------
    def step(self, ti: int, h: MonoidValue, s: str) -> int:
        for guard, target in self._compiled[ti]:
            if guard(h, s):
                return target
        return ti

    def update(self, ti: int, h: MonoidValue, w: MonoidValue, s: str) -> tuple[int, MonoidValue]:
        h2 = self.monoid.add(h, w)
        return self.step(ti, h2, s), h2


def transition(tg: TicketGraph, ticket: str, h: MonoidValue, s: str) -> str:
    """First satisfied out-edge in ascending priority, else the ticket itself."""
    return tg.ids[tg.step(tg.index[ticket], h, s)]


def fare_update(tg: TicketGraph, f: FareState, w: MonoidValue, s: str) -> FareState:
    """Add ``w`` to the weight, then transition on the post-addition weight."""
    ti, h = tg.update(tg.index[f.ticket], f.weight, w, s)
    return FareState(tg.ids[ti], h)


def price(tg: TicketGraph, ticket: str) -> Fraction:
    return tg.ticket(ticket).price


def compute_reach(tg: TicketGraph, ticket: str) -> frozenset:
    if ticket not in tg.index:
        raise StructuralError(f"unknown ticket {ticket!r}")
    return tg.mask_to_ids(tg.reach_mask[tg.index[ticket]])


def check_traceable(tg: TicketGraph, tickets: Iterable[str]) -> bool:
    """Unique topological order of the induced sub-DAG (Kahn peeling)."""
    members = set(tickets)
    indeg = {t: 0 for t in members}
    succ = {t: [] for t in members}
    for e in tg.edges:
        if e.source in members and e.target in members and e.target not in succ[e.source]:
            succ[e.source].append(e.target)
            indeg[e.target] += 1
    ready = [t for t, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        if len(ready) != 1:
            return False
        t = ready.pop()
        seen += 1
        for w in succ[t]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return seen == len(members)


# -- no-overtaking ----------------------------------------------------

@dataclass(frozen=True)
class CheckMode:
    """How to decide the no-overtaking property.

    ``exhaustive`` needs a finite monoid, ``sampled`` draws ``trials`` random
    cases, ``auto`` picks exhaustive when possible and sampled otherwise.
    """

    kind: str = "auto"
    trials: int = 100_000
    seed: int = 0

    def resolve(self, monoid: MonoidSpec) -> "CheckMode":
        if self.kind == "auto":
            return CheckMode("exhaustive" if monoid.finite else "sampled", self.trials, self.seed)
        if self.kind not in ("exhaustive", "sampled"):
            raise ValueError(f"unknown check mode {self.kind!r}")
        return self


@dataclass(frozen=True)
class Witness:
    k: str
    l: str
    h: MonoidValue
    h_bar: MonoidValue
    event: str
    got_k: str
    got_l: str


@dataclass(frozen=True)
class Verdict:
    status: str  # "holds" | "violated" | "unknown"
    mode: str
    trials: int = 0
    witness: Witness | None = None

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def sampling_scale(tg: TicketGraph) -> list[int]:
    """Per-component draw bound for unbounded counters, from guard constants."""
    top = [0] * len(tg.monoid.components)
    for e in tg.edges:
        for name, c in e.guard.constants:
            i = tg.monoid.index(name)
            top[i] = max(top[i], c)
    return [2 * t + 2 for t in top]


def _pairs_in(tg: TicketGraph, mask: int) -> list[tuple[int, int]]:
    members = [i for i in range(len(tg.ids)) if mask >> i & 1]
    return [(k, l) for k in members for l in members if tg.reach_mask[k] >> l & 1]


def check_no_overtaking(tg: TicketGraph, ticket: str, mode: CheckMode = CheckMode()) -> Verdict:
    """Check that comparable states never diverge after the same update.

    For all ``k, l`` in the reach of ``ticket`` with a path ``k -> l``, all
    ``h <= h_bar`` and all events ``s``, the ticket reached from ``(k, h, s)``
    must have a path to the one reached from ``(l, h_bar, s)``.
    """
    mode = mode.resolve(tg.monoid)
    mask = tg.reach_mask[tg.index[ticket]]
    if mode.kind == "exhaustive":
        return _exhaustive(tg, mask)
    return _sampled(tg, mask, mode.trials, mode.seed)


def _witness(tg, k, l, h, hb, s, gk, gl) -> Verdict:
    return Verdict("violated", "", 0, Witness(tg.ids[k], tg.ids[l], h, hb, s, tg.ids[gk], tg.ids[gl]))


def _exhaustive(tg: TicketGraph, mask: int) -> Verdict:
    m = tg.monoid
    if not m.finite:
        bad = [c.name for c in m.components if not c.finite]
        raise CapabilityError(f"exhaustive no-overtaking check needs a finite monoid; unbounded: {bad}")
    values = list(m.enumerate())
    members = [i for i in range(len(tg.ids)) if mask >> i & 1]
    table = {(k, s): {h: tg.step(k, h, s) for h in values} for k in members for s in tg.events}
    reach = tg.reach_mask
    # Same ticket, covering pairs: reachability is transitive, so unit steps suffice.
    for k in members:
        for h in values:
            for hb in m.unit_steps(h):
                for s in tg.events:
                    a, b = table[k, s][h], table[k, s][hb]
                    if not reach[a] >> b & 1:
                        v = _witness(tg, k, k, h, hb, s, a, b)
                        return Verdict("violated", "exhaustive", 0, v.witness)
    # Distinct tickets on a path, equal weights.
    for k, l in _pairs_in(tg, mask):
        if k == l:
            continue
        for h in values:
            for s in tg.events:
                a, b = table[k, s][h], table[l, s][h]
                if not reach[a] >> b & 1:
                    v = _witness(tg, k, l, h, h, s, a, b)
                    return Verdict("violated", "exhaustive", 0, v.witness)
    return Verdict("holds", "exhaustive", len(values))


def _sampled(tg: TicketGraph, mask: int, trials: int, seed: int) -> Verdict:
    gen = np.random.default_rng(seed)
    m = tg.monoid
    scale = sampling_scale(tg)
    pairs = _pairs_in(tg, mask)
    reach = tg.reach_mask
    events = tg.events
    # draws are vectorized; the ticket steps themselves run one by one
    h_cols = m.random_columns(gen, trials, scale)
    hb_cols = m.add_columns(h_cols, m.random_columns(gen, trials, scale, sparse=True))
    pick = gen.integers(0, len(pairs), trials).tolist()
    evs = gen.integers(0, len(events), trials).tolist()
    for h, hb, pi, si in zip(m.rows(h_cols), m.rows(hb_cols), pick, evs):
        k, l = pairs[pi]
        s = events[si]
        a, b = tg.step(k, h, s), tg.step(l, hb, s)
        if not reach[a] >> b & 1:
            v = _witness(tg, k, l, h, hb, s, a, b)
            return Verdict("violated", "sampled", trials, v.witness)
    return Verdict("holds", "sampled", trials)


# -- comparability partition ----------------------------------------

FULL, PARTIAL, NONE = 0, 1, 2


@dataclass(frozen=True)
class ComparabilityPartition:
    full: frozenset
    partial: frozenset
    none: frozenset
    provenance: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)

    def class_of(self, ticket: str) -> str:
        if ticket in self.full:
            return "full"
        if ticket in self.partial:
            return "partial"
        return "none"


def compute_partition(tg: TicketGraph, mode: CheckMode = CheckMode(),
                      asserted: dict | None = None) -> ComparabilityPartition:
    """Split tickets into fully, partially and non-comparable classes.

    ``asserted`` maps ``full``/``partial``/``none`` to ticket ids that the
    configuration places by fiat; those are recorded as such.
    """
    mode = mode.resolve(tg.monoid)
    classes: dict[str, str] = {}
    prov: dict[str, str] = {}
    evidence: dict[str, str] = {}
    for cls, ids in (asserted or {}).items():
        if cls not in ("full", "partial", "none"):
            raise StructuralError(f"unknown partition class {cls!r}")
        for t in ids:
            tg.ticket(t)
            classes[t] = cls
            prov[t] = "asserted_by_config"
            evidence[t] = "asserted"
    tag = "proved_exhaustive" if mode.kind == "exhaustive" else f"proved_sampled({mode.trials})"
    for i, t in enumerate(tg.ids):
        if t in classes:
            continue
        reach = compute_reach(tg, t)
        if not check_traceable(tg, reach):
            evidence[t] = "reach is not traceable"
            cls = None
        else:
            verdict = check_no_overtaking(tg, t, mode)
            if verdict.holds:
                classes[t], prov[t] = "full", tag
                evidence[t] = f"no-overtaking holds ({verdict.mode})"
                continue
            w = verdict.witness
            evidence[t] = (f"no-overtaking violated: {w.k}/{w.l} h={tg.monoid.format(w.h)} "
                           f"h_bar={tg.monoid.format(w.h_bar)} s={w.event} -> {w.got_k}, {w.got_l}")
            cls = None
        weight_free = all(
            not e.guard.weight_dependent for r in reach for e in tg.out_edges[tg.index[r]]
        )
        classes[t] = "partial" if weight_free else "none"
        # membership outside C_F is decided exactly (structure or a concrete witness)
        prov[t] = "proved_exhaustive"
    return ComparabilityPartition(
        full=frozenset(t for t, c in classes.items() if c == "full"),
        partial=frozenset(t for t, c in classes.items() if c == "partial"),
        none=frozenset(t for t, c in classes.items() if c == "none"),
        provenance=prov,
        evidence=evidence,
    )


def partition_consistency(tg: TicketGraph, part: ComparabilityPartition) -> list[str]:
    """Tickets in the full class whose reach leaves it (should be empty)."""
    bad = []
    for t in part.full:
        if not compute_reach(tg, t) <= part.full:
            bad.append(t)
    return sorted(bad)


class Comparator:
    """Index-level dominance test, precomputed for one partition."""

    def __init__(self, tg: TicketGraph, part: ComparabilityPartition):
        self.tg = tg
        self.part = part
        self.cls = tuple(
            FULL if t in part.full else PARTIAL if t in part.partial else NONE for t in tg.ids
        )
        self.reach = tg.reach_mask
        self.keep = tg.fss_keep
        self.leq = tg.monoid.leq
        self.leq_masked = tg.monoid.leq_masked

    def weakly(self, t1: int, h1, t2: int, h2, fss: bool) -> bool:
        """``(t1, h1) <=_C (t2, h2)``."""
        c = self.cls[t1]
        if c == NONE:
            return False
        if t1 != t2:
            if c == PARTIAL or not self.reach[t1] >> t2 & 1:
                return False
            return self.leq(h1, h2)
        if fss:
            return self.leq_masked(h1, h2, self.keep[t1])
        return self.leq(h1, h2)

    def same(self, t1: int, h1, t2: int, h2, fss: bool) -> bool:
        """Equal ticket and (masked) equal weight."""
        if t1 != t2:
            return False
        if fss:
            return all(h1[i] == h2[i] for i in self.keep[t1])
        return h1 == h2


def compare_states(tg: TicketGraph, f1: FareState, f2: FareState,
                   part: ComparabilityPartition, fss: bool = False) -> Dominance:
    cmp = Comparator(tg, part)
    t1, t2 = tg.index[f1.ticket], tg.index[f2.ticket]
    if not cmp.weakly(t1, f1.weight, t2, f2.weight, fss):
        return Dominance.NONE
    if cmp.same(t1, f1.weight, t2, f2.weight, fss):
        return Dominance.EQUAL
    return Dominance.STRICT


@dataclass
class MonotonicityReport:
    checked: int
    violations: list  # (f1, f2, w, s, f1', f2') tuples of FareState/values, at most ``keep``

    @property
    def holds(self) -> bool:
        return not self.violations


def check_monotonicity(tg: TicketGraph, part: ComparabilityPartition, mode: CheckMode = CheckMode(),
                       fss: bool = False, keep: int = 5) -> MonotonicityReport:
    """Test that ``f1 <=_C f2`` survives every common update ``(w, s)``.

    Exhaustive mode walks every comparable pair of a finite monoid with every
    weight; sampled mode draws ``f2`` above ``f1`` and a random letter.
    """
    mode = mode.resolve(tg.monoid)
    cmp = Comparator(tg, part)
    m = tg.monoid
    n = len(tg.ids)
    bad: list = []
    checked = 0

    def probe(t1, h1, t2, h2, w, s):
        nonlocal checked
        checked += 1
        a, b = tg.update(t1, h1, w, s), tg.update(t2, h2, w, s)
        if not cmp.weakly(a[0], a[1], b[0], b[1], fss) and len(bad) < keep:
            bad.append((FareState(tg.ids[t1], h1), FareState(tg.ids[t2], h2), w, s,
                        FareState(tg.ids[a[0]], a[1]), FareState(tg.ids[b[0]], b[1])))

    if mode.kind == "exhaustive":
        if not m.finite:
            raise CapabilityError("exhaustive monotonicity sweep needs a finite monoid")
        values = list(m.enumerate())
        for t1 in range(n):
            for t2 in range(n):
                for h1 in values:
                    for h2 in values:
                        if not cmp.weakly(t1, h1, t2, h2, fss):
                            continue
                        for w in values:
                            for s in tg.events:
                                probe(t1, h1, t2, h2, w, s)
        return MonotonicityReport(checked, bad)
    rng = random.Random(mode.seed)
    scale = sampling_scale(tg)
    comparable = [i for i in range(n) if cmp.cls[i] != NONE]
    if not comparable:
        return MonotonicityReport(0, bad)
    for _ in range(mode.trials):
        t1 = rng.choice(comparable)
        if cmp.cls[t1] == FULL:
            t2 = rng.choice([j for j in range(n) if tg.reach_mask[t1] >> j & 1])
        else:
            t2 = t1
        h1 = m.random(rng, scale)
        h2 = m.add(h1, m.random_sparse(rng, scale))
        probe(t1, h1, t2, h2, m.random_sparse(rng, scale), rng.choice(tg.events))
    return MonotonicityReport(checked, bad)


# -- validation -----------------------------------------------------

@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    acyclic: bool | None = None

    @property
    def valid(self) -> bool:
        return not self.errors

    def error(self, code: str, msg: str):
        self.errors.append({"code": code, "message": msg})

    def warn(self, code: str, msg: str):
        self.warnings.append({"code": code, "message": msg})

    def to_dict(self) -> dict:
        return {"valid": self.valid, "acyclic": self.acyclic,
                "errors": list(self.errors), "warnings": list(self.warnings)}


def find_cycle(tg: TicketGraph) -> list[str] | None:
    color = {t: 0 for t in tg.ids}
    stack_path: list[str] = []

    def dfs(v):
        color[v] = 1
        stack_path.append(v)
        for e in tg.out_edges[tg.index[v]]:
            w = e.target
            if color[w] == 1:
                return stack_path[stack_path.index(w):] + [w]
            if color[w] == 0:
                found = dfs(w)
                if found:
                    return found
        color[v] = 2
        stack_path.pop()
        return None

    for t in tg.ids:
        if color[t] == 0:
            c = dfs(t)
            if c:
                return c
    return None


def validate_graph(tg: TicketGraph, report: ValidationReport | None = None,
                   lint_trials: int = 2000, seed: int = 0) -> ValidationReport:
    report = report or ValidationReport()
    if not tg.ids:
        report.error("no_tickets", "the ticket set is empty")
        return report
    cycle = find_cycle(tg)
    report.acyclic = cycle is None
    if cycle:
        report.error("cycle", "ticket graph has a cycle: " + " -> ".join(cycle))
    for e in tg.edges:
        if e.source == e.target:
            continue
        if tg.ticket(e.target).price < tg.ticket(e.source).price:
            report.error(
                "price_not_monotone",
                f"price drops along {e.source}->{e.target} "
                f"({tg.ticket(e.source).price} > {tg.ticket(e.target).price})",
            )
    for i, es in enumerate(tg.out_edges):
        prios = [e.priority for e in es]
        if len(set(prios)) != len(prios):
            report.error("duplicate_priority", f"ticket {tg.ids[i]} has duplicate edge priorities")
    for t in tg.tickets:
        if not t.fss_ignore:
            continue
        used = set()
        for r in compute_reach(tg, t.id):
            for e in tg.out_edges[tg.index[r]]:
                used |= e.guard.components
        clash = sorted(used & set(t.fss_ignore))
        if clash:
            report.error(
                "fss_unsound",
                f"ticket {t.id} ignores {clash} but guards reachable from it read them",
            )
    if report.acyclic:
        _lint_overlaps(tg, report, lint_trials, seed)
    return report


def _lint_overlaps(tg: TicketGraph, report: ValidationReport, trials: int, seed: int):
    rng = random.Random(seed)
    scale = sampling_scale(tg)
    for i, compiled in enumerate(tg._compiled):
        if len(compiled) < 2:
            continue
        hits = set()
        for _ in range(trials):
            h = tg.monoid.random(rng, scale)
            s = tg.events[rng.randrange(len(tg.events))]
            fired = [tg.ids[t] for g, t in compiled if g(h, s)]
            if len(fired) > 1:
                hits.add(tuple(fired))
        for combo in sorted(hits):
            report.warn("overlapping_guards",
                        f"{tg.ids[i]}: guards to {', '.join(combo)} can fire together; "
                        f"priority decides")


def build_graph(monoid: MonoidSpec, tickets: list[dict], edges: list[dict],
                events: list[str], noop_event: str = "s0") -> TicketGraph:
    """Construct a graph from plain dicts as found in a fare document."""
    ts = [Ticket(d["id"], as_price(d.get("price", 0)), frozenset(d.get("fss_ignore", ())))
          for d in tickets]
    es = [Edge(d["from"], d["to"], int(d.get("priority", 0)),
               parse_guard(d.get("guard", "true"), monoid, events)) for d in edges]
    return TicketGraph(monoid, ts, es, events, noop_event)
