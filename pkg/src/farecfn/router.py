"""Round-based routing: RAPTOR, backward RAPTOR and fare-state McRAPTOR with
target-bound, tight-bound, price-based and fare-specific pruning.

Journey semantics shared with the oracles:

* a query starts at the origin with one *fresh* label per initial fare state,
* every boarding waits for the stop's transfer time,
* boarding applies the route's boarding pair, except for the very first
  boarding of a journey that has neither walked nor ridden yet,
* riding into a stop applies the ride-in pair of that stop,
* footpaths change the time only and cannot follow another footpath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import lcm

from .tickets import Comparator, ComparabilityPartition, FareState, format_price
from .timetable import FareTimetable

INF = math.inf
NEG_INF = -math.inf
DEFAULT_ROUNDS = 25
VARIANTS = ("mcraptor", "target_bmrap", "tight_bmrap")


class RouterError(RuntimeError):
    pass


@dataclass(frozen=True)
class Query:
    origin: str
    target: str
    departure: int
    max_rounds: int = DEFAULT_ROUNDS
    ptp: bool = False
    fss: bool = False
    variant: str = "mcraptor"
    slack_arr: float = 0
    slack_tr: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.slack_arr < 0 or self.slack_tr < 0:
            raise ValueError("slacks must be non-negative")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be non-negative")


class Label:
    """Arrival time, trip count, fare state, freshness and a back-pointer."""

    __slots__ = ("eta", "k", "ticket", "weight", "fresh", "parent", "leg", "seq")

    def __init__(self, eta, k, ticket, weight, fresh, parent, leg, seq):
        self.eta = eta
        self.k = k
        self.ticket = ticket
        self.weight = weight
        self.fresh = fresh
        self.parent = parent
        self.leg = leg
        self.seq = seq

    def __repr__(self):
        return f"Label(eta={self.eta}, k={self.k}, ticket={self.ticket}, weight={self.weight})"


@dataclass(frozen=True)
class Leg:
    kind: str  # "ride" or "walk"
    from_stop: str
    to_stop: str
    dep: int
    arr: int
    route: str = ""
    trip: str = ""
    fare: FareState | None = None


@dataclass(frozen=True)
class Journey:
    origin: str
    target: str
    departure: int
    legs: tuple[Leg, ...]
    arrival: int
    trips: int
    ticket: str
    price: Fraction
    fare: FareState
    trace: tuple[FareState, ...]
    order: int = 0

    @property
    def key(self) -> tuple:
        return (self.arrival, self.trips, self.price)

    def to_dict(self, monoid=None) -> dict:
        def fs(f):
            w = monoid.to_doc(f.weight) if monoid else list(f.weight)
            return {"ticket": f.ticket, "weight": w}
        return {
            "arrival": self.arrival, "trips": self.trips, "ticket": self.ticket,
            "price": format_price(self.price),
            "legs": [{"kind": l.kind, "from": l.from_stop, "to": l.to_stop, "dep": l.dep,
                      "arr": l.arr, **({"route": l.route, "trip": l.trip} if l.kind == "ride" else {}),
                      "fare": fs(l.fare)} for l in self.legs],
            "trace": [fs(f) for f in self.trace],
        }


@dataclass
class Stats:
    scans: int = 0
    rounds: int = 0
    labels: int = 0
    stage_scans: dict = field(default_factory=dict)

    @property
    def total_scans(self) -> int:
        return self.scans + sum(self.stage_scans.values())


@dataclass
class RouteResult:
    query: Query
    journeys: list[Journey]
    stats: Stats
    anchors: list[tuple[int, int]] = field(default_factory=list)

    @property
    def price_optimal(self) -> list[Journey]:
        return price_filter(self.journeys)


# -- plain RAPTOR ------------------------------------------------------

@dataclass
class RaptorResult:
    arrivals: list[list[float]]  # arrivals[k][p]: earliest with at most k trips
    anchors: list[tuple[int, int]]  # (arrival, trips) Pareto set at the target
    scans: int
    rounds: int

    def target_bound(self, target: int, k: int) -> float:
        """Earliest target arrival with at most ``k`` trips (last value past the end)."""
        k = min(k, len(self.arrivals) - 1)
        return self.arrivals[k][target]


def _collect_routes(ftt: FareTimetable, marked, first=True) -> dict[int, int]:
    q: dict[int, int] = {}
    for p in marked:
        for r, pos in ftt.routes_at[p]:
            cur = q.get(r)
            if cur is None or (pos < cur if first else pos > cur):
                q[r] = pos
    return q


def raptor(ftt: FareTimetable, origin: int, target: int | None, departure: int,
           max_rounds: int = DEFAULT_ROUNDS) -> RaptorResult:
    """Earliest arrival per number of trips; target pruning when ``target`` is given."""
    n = len(ftt.stops)
    transfer = ftt.transfer
    best = [INF] * n
    tau = [INF] * n
    tau[origin] = best[origin] = departure
    marked = {origin}
    for q, l in ftt.walks[origin]:
        if departure + l < tau[q]:
            tau[q] = best[q] = departure + l
            marked.add(q)
    arrivals = [tau[:]]
    scans = rounds = 0
    for k in range(1, max_rounds + 1):
        if not marked:
            break
        rounds = k
        prev = arrivals[-1]
        cur = prev[:]
        improved = set()
        for r, pos0 in sorted(_collect_routes(ftt, marked).items()):
            scans += 1
            route = ftt.routes[r]
            arr, dep_cols = route.arr, route.dep_cols
            trip = None
            for i in range(pos0, len(route.stops)):
                p = route.stops[i]
                if trip is not None:
                    a = arr[trip][i]
                    bound = best[p] if target is None else min(best[p], best[target])
                    if a < bound:
                        cur[p] = best[p] = a
                        improved.add(p)
                t = prev[p]
                if t < INF and (trip is None or t + transfer[p] <= dep_cols[i][trip]):
                    cand = route.earliest_trip(i, t + transfer[p])
                    if cand is not None and (trip is None or cand < trip):
                        trip = cand
        marked = set(improved)
        for p in improved:
            for q, l in ftt.walks[p]:
                a = cur[p] + l
                bound = best[q] if target is None else min(best[q], best[target])
                if a < bound:
                    cur[q] = best[q] = a
                    marked.add(q)
        arrivals.append(cur)
    anchors = []
    if target is not None:
        last = INF
        for k, row in enumerate(arrivals):
            if row[target] < last:
                last = row[target]
                anchors.append((int(last), k))
    return RaptorResult(arrivals, anchors, scans, rounds)


def backward_raptor(ftt: FareTimetable, target: int, latest: float, rounds: int):
    """Latest departures: ``table[k][p]`` is the latest arrival time at ``p``
    from which ``target`` is reached by ``latest`` with at most ``k`` more trips.

    Returns ``(table, scans)``; the table has rows ``0..rounds``.
    """
    n = len(ftt.stops)
    transfer = ftt.transfer
    tau = [NEG_INF] * n
    tau[target] = latest
    marked = {target}
    for p, l in ftt.walks_in[target]:
        if latest - l > tau[p]:
            tau[p] = latest - l
            marked.add(p)
    table = [tau]
    scans = 0
    for k in range(1, rounds + 1):
        prev = table[-1]
        if not marked:
            table.append(prev[:])
            continue
        cur = prev[:]
        improved = set()
        for r, pos0 in sorted(_collect_routes(ftt, marked, first=False).items()):
            scans += 1
            route = ftt.routes[r]
            dep, arr_cols = route.dep, route.arr_cols
            trip = None
            for i in range(pos0, -1, -1):
                p = route.stops[i]
                if trip is not None:
                    d = dep[trip][i] - transfer[p]
                    if d > cur[p]:
                        cur[p] = d
                        improved.add(p)
                t = prev[p]
                if t > NEG_INF and (trip is None or arr_cols[i][trip] <= t):
                    cand = route.latest_trip_arriving(i, t)
                    if cand is not None and (trip is None or cand > trip):
                        trip = cand
        marked = set(improved)
        for p in improved:
            for q, l in ftt.walks_in[p]:
                if cur[p] - l > cur[q]:
                    cur[q] = cur[p] - l
                    marked.add(q)
        table.append(cur)
    return table, scans


@dataclass
class DepartureBounds:
    """Overlapped latest-departure table, indexed by remaining trip budget."""

    m: int
    rows: list[list[float]]

    def get(self, j: int, p: int) -> float:
        if j < 0:
            return NEG_INF
        return self.rows[min(j, self.m)][p]


def overlap_dep_bounds(anchors: list[tuple[int, int]], tables: list[list[list[float]]],
                       slack_tr: int, n_stops: int) -> DepartureBounds:
    """Pointwise max of the per-anchor tables, each shifted to the common budget ``m``."""
    if not anchors:
        return DepartureBounds(0, [[NEG_INF] * n_stops])
    m = max(t for _, t in anchors) + slack_tr
    rows = [[NEG_INF] * n_stops for _ in range(m + 1)]
    for (_, trips), table in zip(anchors, tables):
        nj = trips + slack_tr
        for j in range(m - nj, m + 1):
            src = table[j - m + nj]
            row = rows[j]
            for p in range(n_stops):
                if src[p] > row[p]:
                    row[p] = src[p]
    return DepartureBounds(m, rows)


# -- bags ------------------------------------------------------------

def _dominates(cmp: Comparator, fss: bool, a: Label, eta, ti, h, fresh) -> bool:
    if a.eta > eta or a.fresh != fresh:
        return False
    if a.ticket == ti and a.weight == h:
        return True
    return cmp.weakly(a.ticket, a.weight, ti, h, fss)


def bag_insert(bag: list, label: Label, cmp: Comparator, fss: bool = False) -> bool:
    """Insert unless weakly dominated; drop the labels the newcomer dominates.

    Returns ``True`` if inserted.  Exact duplicates are rejected.
    """
    for other in bag:
        if _dominates(cmp, fss, other, label.eta, label.ticket, label.weight, label.fresh):
            return False
    bag[:] = [o for o in bag
              if not _dominates(cmp, fss, label, o.eta, o.ticket, o.weight, o.fresh)]
    bag.append(label)
    return True


class _Search:
    """One fare-state McRAPTOR run with optional pruning hooks."""

    def __init__(self, ftt: FareTimetable, cmp: Comparator, origin: int, target: int,
                 departure: int, rounds: int, ptp: bool, fss: bool,
                 bag_bound=None, route_bound=None):
        self.ftt = ftt
        self.g = ftt.graph
        self.cmp = cmp
        self.origin, self.target = origin, target
        self.departure = departure
        self.rounds = rounds
        self.ptp, self.fss = ptp, fss
        self.bag_bound = bag_bound  # (k, p) -> latest admissible arrival
        self.route_bound = route_bound  # (k, p) -> latest admissible on-board arrival
        self.bags: list[dict[int, list[Label]]] = []
        self.seq = 0
        self.stats = Stats()
        denom = lcm(*(Fraction(x).denominator for x in self.g.prices)) if self.g.prices else 1
        self.price_int = [int(Fraction(x) * denom) for x in self.g.prices]
        self.targets: list[tuple] = []  # Pareto list of (arrival, price) found at the target
        self.marked: set[int] = set()

    # -- pruning ---------------------------------------------------------
    def _ptp_pruned(self, eta, ti) -> bool:
        pr = self.price_int[ti]
        for e, p in self.targets:
            if e <= eta and p <= pr:
                return True
        return False

    def _note_target(self, eta, ti):
        pr = self.price_int[ti]
        if any(e <= eta and p <= pr for e, p in self.targets):
            return
        self.targets = [(e, p) for e, p in self.targets if not (eta <= e and pr <= p)]
        self.targets.append((eta, pr))

    def _insert(self, k, p, eta, ti, h, fresh, parent, leg) -> bool:
        if self.bag_bound is not None and eta > self.bag_bound(k, p):
            return False
        if self.ptp and self._ptp_pruned(eta, ti):
            return False
        cmp, fss = self.cmp, self.fss
        for j in range(k):
            for other in self.bags[j].get(p, ()):
                if _dominates(cmp, fss, other, eta, ti, h, fresh):
                    return False
        bag = self.bags[k].setdefault(p, [])
        for other in bag:
            if _dominates(cmp, fss, other, eta, ti, h, fresh):
                return False
        label = Label(eta, k, ti, h, fresh, parent, leg, self.seq)
        self.seq += 1
        bag[:] = [o for o in bag if not _dominates(cmp, fss, label, o.eta, o.ticket, o.weight, o.fresh)]
        bag.append(label)
        self.stats.labels += 1
        self.marked.add(p)
        if p == self.target:
            self._note_target(eta, ti)
        return True

    def _route_pruned(self, k, p, a, ti) -> bool:
        if self.route_bound is not None and a > self.route_bound(k, p):
            return True
        return self.ptp and self._ptp_pruned(a, ti)

    def _footpaths(self, k, stops):
        snapshot = [(p, list(self.bags[k].get(p, ()))) for p in sorted(stops)]
        for p, labels in snapshot:
            for q, l in self.ftt.walks[p]:
                for lab in labels:
                    self._insert(k, q, lab.eta + l, lab.ticket, lab.weight, False, lab,
                                 ("walk", p, q, l))

    # -- main loop -------------------------------------------------------
    def run(self) -> list[Label]:
        ftt, g = self.ftt, self.g
        self.bags.append({})
        for ti, h in ftt.initial[self.origin]:
            self._insert(0, self.origin, self.departure, ti, h, True, None, None)
        self._footpaths(0, [self.origin])
        update = g.update
        cmp, fss = self.cmp, self.fss
        transfer = ftt.transfer
        for k in range(1, self.rounds + 1):
            if not self.marked:
                break
            marked, self.marked = self.marked, set()
            self.stats.rounds = k
            self.bags.append({})
            prev = self.bags[k - 1]
            for r, pos0 in sorted(_collect_routes(ftt, marked).items()):
                self.stats.scans += 1
                route = ftt.routes[r]
                arr = route.arr
                rb: list[list] = []  # [trip, ticket, weight, parent, board position]
                for i in range(pos0, len(route.stops)):
                    p = route.stops[i]
                    if rb:
                        w1, e1 = route.ride_w[i], route.ride_e[i]
                        moved = []
                        for trip, ti, h, parent, b in rb:
                            ti2, h2 = update(ti, h, w1, e1)
                            a = arr[trip][i]
                            if self._route_pruned(k, p, a, ti2):
                                continue
                            moved.append([trip, ti2, h2, parent, b])
                        rb = moved
                        for trip, ti, h, parent, b in rb:
                            self._insert(k, p, arr[trip][i], ti, h, False, parent,
                                         ("ride", r, trip, b, i))
                    labels = prev.get(p)
                    if not labels:
                        continue
                    for lab in labels:
                        trip = route.earliest_trip(i, lab.eta + transfer[p])
                        if trip is None:
                            continue
                        if lab.fresh:
                            ti, h = lab.ticket, lab.weight
                        else:
                            ti, h = update(lab.ticket, lab.weight, route.board_w[i], route.board_e[i])
                        if self._route_pruned(k, p, arr[trip][i], ti):
                            continue
                        if any(o[0] <= trip and ((o[1] == ti and o[2] == h)
                                                 or cmp.weakly(o[1], o[2], ti, h, fss))
                               for o in rb):
                            continue
                        rb = [o for o in rb if not (trip <= o[0] and (
                            (o[1] == ti and o[2] == h) or cmp.weakly(ti, h, o[1], o[2], fss)))]
                        rb.append([trip, ti, h, lab, i])
            self._footpaths(k, set(self.marked))
        out = []
        for bags in self.bags:
            out.extend(bags.get(self.target, ()))
        return out


# -- journeys --------------------------------------------------------

def reconstruct_journey(ftt: FareTimetable, label: Label, departure: int | None = None) -> Journey:
    """Follow back-pointers to the origin and re-simulate the fare forward."""
    chain = []
    cur = label
    while cur is not None:
        chain.append(cur)
        cur = cur.parent
        if len(chain) > 10_000:
            raise RouterError("back-pointer chain does not terminate")
    chain.reverse()
    root = chain[0]
    if root.leg is not None or not root.fresh:
        raise RouterError("back-pointer chain does not start at an origin label")
    g, stops = ftt.graph, ftt.stops
    ti, h = root.ticket, root.weight
    eta, fresh, trips = root.eta, True, 0
    legs, trace = [], []
    for lab in chain[1:]:
        kind = lab.leg[0]
        if kind == "walk":
            _, p, q, l = lab.leg
            eta_new = eta + l
            legs.append(Leg("walk", stops[p].stop_id, stops[q].stop_id, eta, eta_new,
                            fare=FareState(g.ids[ti], h)))
            eta = eta_new
        elif kind == "ride":
            _, r, trip, b, a = lab.leg
            route = ftt.routes[r]
            p = route.stops[b]
            if route.dep[trip][b] < eta + ftt.transfer[p]:
                raise RouterError("reconstructed ride departs before the label is ready")
            if not fresh:
                ti, h = g.update(ti, h, route.board_w[b], route.board_e[b])
            for i in range(b + 1, a + 1):
                ti, h = g.update(ti, h, route.ride_w[i], route.ride_e[i])
            legs.append(Leg("ride", stops[p].stop_id, stops[route.stops[a]].stop_id,
                            route.dep[trip][b], route.arr[trip][a], route.route_id,
                            route.trip_ids[trip], FareState(g.ids[ti], h)))
            eta = route.arr[trip][a]
            trips += 1
        else:
            raise RouterError(f"unknown leg kind {kind!r}")
        fresh = False
        trace.append(FareState(g.ids[ti], h))
        if (eta, ti, h) != (lab.eta, lab.ticket, lab.weight):
            raise RouterError("re-simulated fare state differs from the stored label")
    if trips != label.k:
        raise RouterError("trip count mismatch in reconstruction")
    return Journey(
        origin=legs[0].from_stop if legs else "",
        target=legs[-1].to_stop if legs else "",
        departure=root.eta if departure is None else departure,
        legs=tuple(legs), arrival=int(label.eta), trips=label.k, ticket=g.ids[label.ticket],
        price=g.prices[label.ticket], fare=FareState(g.ids[label.ticket], label.weight),
        trace=tuple([FareState(g.ids[root.ticket], root.weight)] + trace), order=label.seq,
    )


def price_filter(journeys) -> list[Journey]:
    """Pareto filter on (arrival, trips, price); ties keep the first in
    (trips, price, reconstruction order)."""
    ordered = sorted(journeys, key=lambda j: (j.trips, j.price, j.arrival, j.order))
    kept: list[Journey] = []
    for j in ordered:
        if any(o.arrival <= j.arrival and o.trips <= j.trips and o.price <= j.price for o in kept):
            continue
        kept.append(j)
    kept.sort(key=lambda j: (j.arrival, j.trips, j.price, j.order))
    return kept


def ptp_filter(label_price, best_price) -> bool:
    """Price rule on its own: keep a label iff its ticket is cheaper than the
    best price already settled at the target (``None`` means unreached)."""
    return best_price is None or label_price < best_price


def pareto_keys(journeys) -> set:
    return {j.key for j in price_filter(journeys)}


# -- entry points ----------------------------------------------------

class Router:
    """Routing over one fare timetable with a fixed comparability partition."""

    def __init__(self, ftt: FareTimetable, partition: ComparabilityPartition | None = None):
        self.ftt = ftt
        self.partition = partition if partition is not None else ftt.fares.partition()
        self.cmp = Comparator(ftt.graph, self.partition)

    def _resolve(self, q: Query) -> tuple[int, int]:
        return self.ftt.stop_index(q.origin), self.ftt.stop_index(q.target)

    def _journeys(self, labels, q: Query, o: int, t: int) -> list[Journey]:
        out = []
        for lab in sorted(labels, key=lambda l: l.seq):
            j = reconstruct_journey(self.ftt, lab, q.departure)
            out.append(_with_ends(j, self.ftt.stops[o].stop_id, self.ftt.stops[t].stop_id))
        return out

    def _search(self, q, o, t, rounds, bag_bound=None, route_bound=None) -> _Search:
        s = _Search(self.ftt, self.cmp, o, t, q.departure, rounds, q.ptp, q.fss,
                    bag_bound, route_bound)
        s.result = s.run()
        return s

    def mc_raptor(self, q: Query) -> RouteResult:
        o, t = self._resolve(q)
        s = self._search(q, o, t, min(q.max_rounds, DEFAULT_ROUNDS))
        return RouteResult(q, self._journeys(s.result, q, o, t), s.stats)

    def target_bmrap(self, q: Query) -> RouteResult:
        o, t = self._resolve(q)
        rounds = min(q.max_rounds, DEFAULT_ROUNDS)
        rr = raptor(self.ftt, o, t, q.departure, rounds)
        if not rr.anchors:
            return RouteResult(q, [], Stats(stage_scans={"raptor": rr.scans}), [])
        sa = q.slack_arr

        def bound(k, p):
            return rr.target_bound(t, k) + sa

        s = self._search(q, o, t, rounds, bound, bound)
        s.stats.stage_scans["raptor"] = rr.scans
        labels = [l for l in s.result if l.eta <= rr.target_bound(t, l.k) + sa]
        return RouteResult(q, self._journeys(labels, q, o, t), s.stats, rr.anchors)

    def bounds(self, q: Query):
        """Anchors, overlapped departure bounds and backward scan count for a query."""
        o, t = self._resolve(q)
        rounds = min(q.max_rounds, DEFAULT_ROUNDS)
        rr = raptor(self.ftt, o, t, q.departure, rounds)
        tables, scans = [], 0
        for arr, trips in rr.anchors:
            table, sc = backward_raptor(self.ftt, t, arr + q.slack_arr, trips + q.slack_tr)
            tables.append(table)
            scans += sc
        return rr, overlap_dep_bounds(rr.anchors, tables, q.slack_tr, len(self.ftt.stops)), scans

    def tight_bmrap(self, q: Query) -> RouteResult:
        o, t = self._resolve(q)
        rr, db, back_scans = self.bounds(q)
        stages = {"raptor": rr.scans, "backward": back_scans}
        if not rr.anchors:
            return RouteResult(q, [], Stats(stage_scans=stages), [])
        m = db.m
        transfer = self.ftt.transfer

        def bag_bound(k, p):
            return db.get(m - k, p)

        def route_bound(k, p):
            return db.get(m - k + 1, p) + transfer[p]

        s = self._search(q, o, t, min(m, q.max_rounds, DEFAULT_ROUNDS), bag_bound, route_bound)
        s.stats.stage_scans.update(stages)
        labels = [l for l in s.result if in_restricted(l.eta, l.k, rr.anchors, q.slack_arr, q.slack_tr)]
        return RouteResult(q, self._journeys(labels, q, o, t), s.stats, rr.anchors)

    def route(self, q: Query) -> RouteResult:
        return getattr(self, "mc_raptor" if q.variant == "mcraptor" else q.variant)(q)


def in_restricted(arrival, trips, anchors, slack_arr, slack_tr) -> bool:
    """Membership in the restricted Pareto region spanned by the anchors."""
    return any(arrival <= a + slack_arr and trips <= t + slack_tr for a, t in anchors)


def in_restricted_by_own_anchor(arrival, trips, anchors, slack_arr, slack_tr) -> bool:
    """The narrower region: only the anchor with the most trips not above ``trips`` counts."""
    own = [(a, t) for a, t in anchors if t <= trips]
    if not own:
        return False
    a, t = max(own, key=lambda x: x[1])
    return arrival <= a + slack_arr and trips <= t + slack_tr


def _with_ends(j: Journey, origin: str, target: str) -> Journey:
    return replace(j, origin=origin, target=target)


def mc_raptor(ftt: FareTimetable, q: Query, partition=None) -> RouteResult:
    return Router(ftt, partition).mc_raptor(q)


def target_bmrap(ftt: FareTimetable, q: Query, partition=None) -> RouteResult:
    return Router(ftt, partition).target_bmrap(q)


def tight_bmrap(ftt: FareTimetable, q: Query, partition=None) -> RouteResult:
    return Router(ftt, partition).tight_bmrap(q)
