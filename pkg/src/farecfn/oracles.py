"""Reference solvers and a seeded instance generator.

Both solvers use the journey semantics documented in :mod:`farecfn.router`
but share none of its pruning logic and never consult a comparability
partition:

* :func:`enumerate_pareto` explores every reachable (stop, time, trips, fare
  state, mode) combination, boarding every catchable trip;
* :func:`dfa_product_dijkstra` folds the fare network into a finite automaton
  and runs Dijkstra on the product with an event-expanded graph.  It needs a
  finite monoid and constant travel times.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .document import FareStructure, fare_structure
from .monoid import CapabilityError
from .router import DEFAULT_ROUNDS, Query, raptor
from .tickets import CheckMode, TicketGraph
from .timetable import FareTimetable, Stop, Timetable, Trip, build_timetable, prepare

FRESH, WALKED, RODE = 0, 1, 2


@dataclass(frozen=True)
class Outcome:
    arrival: int
    trips: int
    price: Fraction
    ticket: str
    weight: tuple

    @property
    def key(self) -> tuple:
        return (self.arrival, self.trips, self.price)


def pareto(points, key=lambda x: x) -> list:
    """Points not weakly dominated by another point with a different key."""
    pts = sorted(points, key=key)
    out: list = []
    for x in pts:
        kx = key(x)
        if any(all(a <= b for a, b in zip(key(o), kx)) for o in out):
            continue
        out.append(x)
    return out


def enumerate_pareto(ftt: FareTimetable, origin: int, target: int, departure: int,
                     max_trips: int = 6, state_cap: int = 2_000_000) -> list[Outcome]:
    """Exact Pareto set over (arrival, trips, price) by exhaustive exploration."""
    found = enumerate_outcomes(ftt, origin, target, departure, max_trips, state_cap)
    return pareto(found, key=lambda o: o.key)


def enumerate_outcomes(ftt: FareTimetable, origin: int, target: int, departure: int,
                       max_trips: int = 6, state_cap: int = 2_000_000) -> list[Outcome]:
    """Every distinct (arrival, trips, fare state) reaching the target."""
    g = ftt.graph
    update = g.update
    start = [(origin, departure, 0, ti, h, FRESH) for ti, h in ftt.initial[origin]]
    seen = set(start)
    stack = list(start)
    found: dict[tuple, Outcome] = {}
    while stack:
        state = stack.pop()
        p, eta, k, ti, h, mode = state
        if p == target:
            o = Outcome(int(eta), k, g.prices[ti], g.ids[ti], h)
            found.setdefault((o.key, ti, h), o)
        succ = []
        if mode != WALKED:
            for q, l in ftt.walks[p]:
                succ.append((q, eta + l, k, ti, h, WALKED))
        if k < max_trips:
            ready = eta + ftt.transfer[p]
            for r, pos in ftt.routes_at[p]:
                route = ftt.routes[r]
                if mode == FRESH:
                    bt, bh = ti, h
                else:
                    bt, bh = update(ti, h, route.board_w[pos], route.board_e[pos])
                for trip in range(len(route.trip_ids)):
                    if route.dep[trip][pos] < ready:
                        continue
                    ct, ch = bt, bh
                    for j in range(pos + 1, len(route.stops)):
                        ct, ch = update(ct, ch, route.ride_w[j], route.ride_e[j])
                        succ.append((route.stops[j], route.arr[trip][j], k + 1, ct, ch, RODE))
        for s in succ:
            if s not in seen:
                seen.add(s)
                stack.append(s)
        if len(seen) > state_cap:
            raise CapabilityError(
                f"enumeration exceeded {state_cap} states; shrink the instance or the trip cap")
    return list(found.values())


def pareto_keys(outcomes) -> set:
    return {o.key for o in outcomes}


# -- finite automaton ------------------------------------------------

@dataclass
class DFA:
    states: list[tuple[int, tuple]]  # (ticket index, weight)
    index: dict
    alphabet: list[tuple[tuple, str]]  # (weight, event)
    delta: list[list[int]]  # delta[q][letter]
    starts: list[int]

    def step(self, q: int, letter: int) -> int:
        return self.delta[q][letter]

    def arcs(self, loops: bool = False) -> set[tuple[int, int]]:
        return {(q, t) for q, row in enumerate(self.delta) for t in row if loops or q != t}


def build_dfa(tg: TicketGraph, alphabet, starts) -> DFA:
    """States are all (ticket, weight) pairs; ``alphabet`` holds (weight, event) letters."""
    m = tg.monoid
    if not m.finite:
        bad = [c.name for c in m.components if not c.finite]
        raise CapabilityError(f"automaton construction needs a finite monoid; unbounded: {bad}")
    weights = list(m.enumerate())
    states = [(ti, h) for ti in range(len(tg.ids)) for h in weights]
    index = {s: i for i, s in enumerate(states)}
    letters = list(dict.fromkeys(alphabet))
    delta = []
    for ti, h in states:
        row = []
        for w, e in letters:
            row.append(index[tg.update(ti, h, w, e)])
        delta.append(row)
    return DFA(states, index, letters, delta, [index[s] for s in starts])


def timetable_alphabet(ftt: FareTimetable) -> list:
    letters = []
    for r in ftt.routes:
        for i in range(len(r.stops)):
            letters.append((r.board_w[i], r.board_e[i]))
            if i:
                letters.append((r.ride_w[i], r.ride_e[i]))
    return list(dict.fromkeys(letters))


def dfa_for_timetable(ftt: FareTimetable, origin: int) -> DFA:
    return build_dfa(ftt.graph, timetable_alphabet(ftt), ftt.initial[origin])


@dataclass
class ConstantRoute:
    offsets: tuple  # time from the first stop to each position
    first: int
    last: int


def constant_profile(ftt: FareTimetable) -> list[ConstantRoute]:
    """Check that every route runs a trip each second with identical run times."""
    out = []
    for r in ftt.routes:
        base = r.dep[0][0]
        offsets = tuple(a - base for a in r.arr[0])
        for t, (arr, dep) in enumerate(zip(r.arr, r.dep)):
            if arr != dep:
                raise CapabilityError(f"route {r.route_id}: dwell times are not zero")
            if dep[0] != base + t:
                raise CapabilityError(f"route {r.route_id}: departures are not one second apart")
            if tuple(a - dep[0] for a in arr) != offsets:
                raise CapabilityError(f"route {r.route_id}: travel times vary between trips")
        out.append(ConstantRoute(offsets, base, r.dep[-1][0]))
    return out


@dataclass
class ProductResult:
    frontier: list[tuple[int, Fraction]]  # Pareto set over (arrival, price)
    best: dict  # DFA state -> earliest arrival at the target
    arcs: int  # product arcs relaxed
    base_arcs: int  # arcs of the event-expanded graph
    states: int


def dfa_product_dijkstra(ftt: FareTimetable, origin: int, target: int, departure: int,
                         dfa: DFA | None = None) -> ProductResult:
    """Earliest arrival per final automaton state on the product graph."""
    prof = constant_profile(ftt)
    dfa = dfa or dfa_for_timetable(ftt, origin)
    letter = {s: i for i, s in enumerate(dfa.alphabet)}
    transfer = ftt.transfer
    # event-expanded graph: ("O",) origin, ("R", p), ("W", p), ("B0", r, i), ("B", r, i)
    adj: dict = {}

    def arc(u, v, cost, sym=None, board=None):
        adj.setdefault(u, []).append((v, cost, sym, board))

    for p, walks in enumerate(ftt.walks):
        for q, l in walks:
            arc(("R", p), ("W", q), l)
    for q, l in ftt.walks[origin]:
        arc(("O",), ("W", q), l)
    for r, route in enumerate(ftt.routes):
        pr = prof[r]
        n = len(route.stops)
        for i, p in enumerate(route.stops):
            if i < n - 1:
                sym = letter[(route.board_w[i], route.board_e[i])]
                win = (pr.first + pr.offsets[i], pr.last + pr.offsets[i])
                for src in (("R", p), ("W", p)):
                    arc(src, ("B0", r, i), transfer[p], sym, win)
                if p == origin:
                    arc(("O",), ("B0", r, i), transfer[p], None, win)
            if i:
                cost = pr.offsets[i] - pr.offsets[i - 1]
                sym = letter[(route.ride_w[i], route.ride_e[i])]
                arc(("B0", r, i - 1), ("B", r, i), cost, sym)
                arc(("B", r, i - 1), ("B", r, i), cost, sym)
                arc(("B", r, i), ("R", p), 0)
    base_arcs = sum(len(v) for v in adj.values())
    dist: dict = {}
    heap = []
    for q0 in dfa.starts:
        node = (("O",), q0)
        dist[node] = departure
        heap.append((departure, 0, node))
    heapq.heapify(heap)
    tick = 1
    arcs = 0
    while heap:
        d, _, node = heapq.heappop(heap)
        if d > dist.get(node, float("inf")):
            continue
        v, q = node
        for w, cost, sym, window in adj.get(v, ()):
            nd = d + cost
            if window is not None:
                # boarding: ready time must fall inside the service window
                if nd > window[1]:
                    continue
                nd = max(nd, window[0])
            q2 = q if sym is None else dfa.delta[q][sym]
            arcs += 1
            nxt = (w, q2)
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, tick, nxt))
                tick += 1
    best: dict = {}
    ends = [("R", target), ("W", target)] + ([("O",)] if origin == target else [])
    for (v, q), d in dist.items():
        if v in ends and d < best.get(q, float("inf")):
            best[q] = d
    g = ftt.graph
    frontier = pareto({(int(d), g.prices[dfa.states[q][0]]) for q, d in best.items()})
    return ProductResult(frontier, best, arcs, base_arcs, len(dfa.states))


def project_arrival_price(outcomes) -> list[tuple[int, Fraction]]:
    return pareto({(o.arrival, o.price) for o in outcomes})


# -- random instances ------------------------------------------------

@dataclass(frozen=True)
class InstanceParams:
    seed: int = 0
    max_stops: int = 10
    max_routes: int = 6
    max_trips_per_route: int = 4
    max_tickets: int = 6
    max_h: int = 200
    edge_density: float = 0.45
    max_events: int = 3
    weight_guard_share: float = 0.7
    constant_time: bool = False
    queries: int = 2
    max_trips: int = 6

    def __post_init__(self):
        if not (2 <= self.max_stops <= 12 and 1 <= self.max_routes <= 8):
            raise ValueError("stop count must be in 2..12 and route count in 1..8")
        if not (1 <= self.max_trips_per_route <= 4 and 1 <= self.max_tickets <= 6):
            raise ValueError("trips per route must be in 1..4 and tickets in 1..6")


@dataclass
class Instance:
    params: InstanceParams
    timetable: Timetable
    fare_doc: dict
    fares: FareStructure
    ftt: FareTimetable
    queries: list[Query] = field(default_factory=list)
    raw_footpaths: list = field(default_factory=list)


def _monoid(rng: random.Random, max_h: int, zones: list[str]) -> list[dict]:
    pool = [
        {"name": "n", "kind": "saturating_counter", "cap": rng.randint(1, 4), "unit": "stops"},
        {"name": "d", "kind": "saturating_counter", "cap": rng.randint(2, 6), "unit": "meters"},
        {"name": "z", "kind": "finite_set", "universe": zones},
        {"name": "x", "kind": "indicator"},
    ]
    rng.shuffle(pool)
    comps, size = [], 1
    for c in pool[: rng.randint(1, 3)]:
        n = {"saturating_counter": lambda c: c["cap"] + 1,
             "finite_set": lambda c: 2 ** len(c["universe"]),
             "indicator": lambda c: 2}[c["kind"]](c)
        if size * n <= max_h:
            comps.append(c)
            size *= n
    return comps


def _atom(rng: random.Random, comps) -> str:
    c = rng.choice(comps)
    if c["kind"] == "saturating_counter":
        op = rng.choice([">=", ">=", ">", "<", "<", "="])
        return f"({op} {c['name']} {rng.randint(1, max(1, c['cap']))})"
    if c["kind"] == "finite_set":
        op = rng.choice([">=", ">=", "<", "<", "="])
        return f"({op} |{c['name']}| {rng.randint(1, len(c['universe']))})"
    return f"(= {c['name']} {rng.choice([1, 1, 0])})"


def _guard(rng: random.Random, comps, events, weight_share: float) -> str:
    ev = [e for e in events if e != "s0"]
    event = f"({'=' if rng.random() < 0.85 else '!='} event {rng.choice(ev)})"
    if not comps or rng.random() > weight_share:
        return event
    atom = _atom(rng, comps)
    r = rng.random()
    if r < 0.45:
        return atom
    if r < 0.7:
        return f"(and {event} {atom})"
    if r < 0.85:
        return f"(or {event} {atom})"
    return f"(and {atom} {_atom(rng, comps)})"


def gen_fare_doc(rng: random.Random, p: InstanceParams, zones: list[str]) -> dict:
    comps = _monoid(rng, p.max_h, zones)
    names = {c["name"]: c for c in comps}
    events = ["s0"] + [f"e{i}" for i in range(1, rng.randint(1, p.max_events) + 1)]
    n_t = rng.randint(1, p.max_tickets)
    prices, cur = [], Fraction(1)
    for _ in range(n_t):
        prices.append(cur)
        cur += Fraction(rng.choice([0, 1, 1, 2, 3]), 2)
    ids = [f"T{i}" for i in range(n_t)]
    # every later ticket gets at least one incoming edge so the graph is connected
    pairs = {(rng.randrange(j), j) for j in range(1, n_t)}
    pairs |= {(i, j) for i in range(n_t) for j in range(i + 1, n_t) if rng.random() < p.edge_density}
    # event-only fares leave branching tickets partially comparable
    share = 0.0 if rng.random() < 0.25 else p.weight_guard_share
    edges = []
    prio = {}
    for i, j in sorted(pairs):
        prio[i] = prio.get(i, -1) + 1
        edges.append({"from": ids[i], "to": ids[j], "priority": prio[i],
                      "guard": _guard(rng, comps, events, share)})
    ride_w, board_w = {}, {}
    if "n" in names:
        ride_w["n"] = 1
    if "d" in names:
        ride_w["d"] = "$distance"
    if "z" in names:
        ride_w["z"] = "$zone"
    if "x" in names:
        (board_w if rng.random() < 0.5 else ride_w)["x"] = 1
    ev = events[1:]
    ride_events, board_events = [], []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.5:
            ride_events.append({"when": [["cur.zone", "==", rng.choice(zones)]],
                                "event": rng.choice(ev)})
        else:
            ride_events.append({"when": [["prev.zone", "!=", "cur.zone"]], "event": rng.choice(ev)})
    if rng.random() < 0.6:
        board_events.append({"event": rng.choice(ev)})
    initial = []
    for z in zones:
        if rng.random() < 0.4:
            rule = {"when": [["cur.zone", "==", z]], "ticket": rng.choice(ids[: max(1, n_t // 2)])}
            if "z" in names and rng.random() < 0.5:
                rule["weight"] = {"z": "$zone"}
            initial.append(rule)
    initial.append({"ticket": ids[0]})
    doc = {
        "monoid": comps,
        "events": events,
        "noop_event": "s0",
        "tickets": [{"id": t, "price": str(pr)} for t, pr in zip(ids, prices)],
        "edges": edges,
        "initial_state": initial,
        "annotation": {"ride": {"weight": ride_w, "events": ride_events},
                       "board": {"weight": board_w, "events": board_events}},
    }
    # fare-specific masks: components no guard in the reach reads
    fs = fare_structure(doc)
    g = fs.graph
    for t, tdoc in zip(g.tickets, doc["tickets"]):
        used = set()
        for r in g.mask_to_ids(g.reach_mask[g.index[t.id]]):
            for e in g.out_edges[g.index[r]]:
                used |= e.guard.components
        free = [c["name"] for c in comps if c["name"] not in used]
        chosen = [c for c in free if rng.random() < 0.7]
        if chosen:
            tdoc["fss_ignore"] = chosen
    return doc


def gen_random_instance(params: InstanceParams) -> Instance:
    rng = random.Random(params.seed)
    n_stops = rng.randint(3, params.max_stops)
    zones = [f"Z{i}" for i in range(1, rng.randint(2, 3) + 1)]
    const = params.constant_time
    stops = [Stop(f"s{i}", f"stop {i}", 51.0 + rng.random() / 10, 11.5 + rng.random() / 10,
                  rng.choice(zones), "", rng.choice(["", "", "c1"]),
                  rng.choice([0, 1, 2]) if const else rng.choice([0, 0, 60, 120]))
             for i in range(n_stops)]
    trips = []
    used_seqs = set()
    for r in range(rng.randint(max(1, params.max_routes // 2), params.max_routes)):
        length = rng.randint(2, min(6, n_stops))
        seq = rng.sample([s.stop_id for s in stops], length)
        if const:
            # identical sequences would merge into one route with doubled frequency
            if tuple(seq) in used_seqs:
                continue
            used_seqs.add(tuple(seq))
            offsets = [0]
            for _ in range(length - 1):
                offsets.append(offsets[-1] + rng.randint(1, 3))
            dist = [0]
            for _ in range(length - 1):
                dist.append(dist[-1] + rng.randint(0, 3))
            for t in range(40):
                times = tuple(t + o for o in offsets)
                trips.append(Trip(f"r{r}t{t}", tuple(seq), times, times, tuple(dist), f"r{r}"))
            continue
        # fast routes cover more distance, so speed tends to cost money
        fast = rng.random() < 0.5
        seg = [rng.randint(1, 4 if fast else 10) * 60 for _ in range(length - 1)]
        base_dist = [rng.randint(2, 3) if fast else rng.randint(0, 1) for _ in range(length - 1)]
        for t in range(rng.randint(min(2, params.max_trips_per_route), params.max_trips_per_route)):
            start = rng.randint(0, 30) * 60
            arr, dep, dist = [], [], [0]
            now = start
            for i in range(length):
                if i:
                    now += seg[i - 1] + rng.choice([0, 0, 0, 60, -60 if seg[i - 1] > 60 else 0])
                    dist.append(dist[-1] + (base_dist[i - 1] if rng.random() < 0.85
                                            else rng.randint(0, 3)))
                arr.append(now)
                now += rng.choice([0, 0, 30])
                dep.append(now)
            trips.append(Trip(f"r{r}t{t}", tuple(seq), tuple(arr), tuple(dep), tuple(dist), f"r{r}"))
    fps = []
    for _ in range(rng.randint(0, 4)):
        a, b = rng.sample(range(n_stops), 2)
        fps.append((stops[a].stop_id, stops[b].stop_id, rng.randint(1, 3) if const else rng.randint(1, 6) * 30))
    tt = build_timetable(stops, trips, fps)
    doc = gen_fare_doc(rng, params, zones)
    fares = fare_structure(doc)
    ftt = prepare(tt, fares)
    queries = []
    for _ in range(params.queries):
        o = rng.randrange(n_stops)
        dep = rng.randint(0, 12) if const else rng.randint(0, 10) * 60
        if const:
            dep += 15  # every stop is already served at this time
        # mostly reachable targets, so that Pareto sets are not trivially empty
        arrivals = raptor(ftt, o, None, dep, params.max_trips).arrivals[-1]
        reach = [p for p in range(n_stops) if p != o and arrivals[p] < float("inf")]
        r = rng.random()
        if reach and r < 0.85:
            t = rng.choice(reach)
        elif r < 0.9:
            t = o
        else:
            t = rng.choice([p for p in range(n_stops) if p != o])
        queries.append(Query(stops[o].stop_id, stops[t].stop_id, dep, max_rounds=params.max_trips))
    return Instance(params, tt, doc, fares, ftt, queries, fps)


def corpus(n: int, base_seed: int = 0, **kw):
    """Seeded instances; every fifth one has constant travel times."""
    for i in range(n):
        yield gen_random_instance(InstanceParams(seed=base_seed + i, constant_time=(i % 5 == 4), **kw))


def partition_mode() -> CheckMode:
    return CheckMode("exhaustive")


__all__ = [
    "Outcome", "enumerate_pareto", "pareto", "pareto_keys", "DFA", "build_dfa",
    "dfa_for_timetable", "timetable_alphabet", "constant_profile", "dfa_product_dijkstra",
    "project_arrival_price", "InstanceParams", "Instance", "gen_random_instance",
    "gen_fare_doc", "corpus", "DEFAULT_ROUNDS",
]
