"""A seeded synthetic city for benchmarks.

Stops sit on a jittered grid split into concentric fare zones.  Lines are a
mix of fast straight trunk lines that skip stops and slower meandering bus
lines.  The fare structure is zonal: a short-hop ticket that upgrades after
a few stops, then one ticket per number of zones touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .document import fare_structure
from .router import Query, raptor
from .timetable import FareTimetable, Stop, Timetable, Trip, build_timetable, prepare


@dataclass(frozen=True)
class CityParams:
    seed: int = 0
    width: int = 25
    height: int = 20
    zones: int = 5
    trunk_lines: int = 24
    bus_lines: int = 276
    first_departure: int = 6 * 3600 + 30 * 60
    last_departure: int = 9 * 3600
    walk_block: int = 2


@dataclass
class City:
    params: CityParams
    timetable: Timetable
    fare_doc: dict
    ftt: FareTimetable
    raw_footpaths: list


def zonal_fare_doc(zone_ids: list[str], short_hops: int = 4) -> dict:
    """Short-hop ticket ``K`` plus ``Z1..Zn`` priced by zones touched."""
    n = len(zone_ids)
    tickets = [{"id": "K", "price": "1.50"}]
    for i in range(1, n + 1):
        tickets.append({"id": f"Z{i}", "price": f"{1.30 + 0.70 * i:.2f}"})
    edges = []
    # a single transition per update, so jump straight to the right zone count
    for prio, j in enumerate(range(n, 1, -1)):
        edges.append({"from": "K", "to": f"Z{j}", "priority": prio, "guard": f"(>= |z| {j})"})
    edges.append({"from": "K", "to": "Z1", "priority": n - 1, "guard": f"(> n {short_hops})"})
    for i in range(1, n):
        for prio, j in enumerate(range(n, i, -1)):
            edges.append({"from": f"Z{i}", "to": f"Z{j}", "priority": prio,
                          "guard": f"(>= |z| {j})"})
    return {
        "monoid": [
            {"name": "n", "kind": "saturating_counter", "cap": short_hops + 1, "unit": "stops"},
            {"name": "z", "kind": "finite_set", "universe": list(zone_ids)},
        ],
        "events": ["s0"],
        "noop_event": "s0",
        "tickets": tickets,
        "edges": edges,
        "initial_state": [{"ticket": "K", "weight": {"z": "$zone"}}],
        "annotation": {"ride": {"weight": {"n": 1, "z": "$zone"}, "events": []},
                       "board": {"weight": {}, "events": []}},
    }


def _walk_line(rng: np.random.Generator, w: int, h: int, length: int) -> list[tuple[int, int]]:
    """A self-avoiding lattice walk biased to keep its heading."""
    x, y = int(rng.integers(w)), int(rng.integers(h))
    path = [(x, y)]
    seen = {(x, y)}
    heading = [(1, 0), (-1, 0), (0, 1), (0, -1)][int(rng.integers(4))]
    while len(path) < length:
        options = [heading] * 3 + [(heading[1], heading[0]), (-heading[1], -heading[0])]
        rng.shuffle(options)
        for dx, dy in options:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and (nx, ny) not in seen:
                x, y, heading = nx, ny, (dx, dy)
                break
        else:
            break
        path.append((x, y))
        seen.add((x, y))
    return path


def _trips(rng, rid, seq, hop_times, headway, params, dwell=0):
    start = params.first_departure + int(rng.integers(headway // 60)) * 60
    out = []
    for n, t0 in enumerate(range(start, params.last_departure + 1, headway)):
        arr, dep, now = [], [], t0
        for i in range(len(seq)):
            if i:
                now += hop_times[i - 1]
            arr.append(now)
            now += dwell if 0 < i < len(seq) - 1 else 0
            dep.append(now)
        out.append(Trip(f"{rid}t{n}", tuple(seq), tuple(arr), tuple(dep), None, rid))
    return out


def synthetic_city(params: CityParams = CityParams()) -> City:
    rng = np.random.default_rng(params.seed)
    w, h = params.width, params.height
    cx, cy = (w - 1) / 2, (h - 1) / 2
    ring = np.maximum(np.abs(np.arange(w)[:, None] - cx) / cx, np.abs(np.arange(h)[None, :] - cy) / cy)
    zone_of = np.minimum((ring * params.zones).astype(int), params.zones - 1)
    zone_ids = [f"z{i + 1}" for i in range(params.zones)]
    jitter = rng.normal(0, 0.0008, size=(w, h, 2))
    stops, sid = [], {}
    for x in range(w):
        for y in range(h):
            s = f"p{x:02d}_{y:02d}"
            sid[x, y] = s
            stops.append(Stop(s, f"stop {x}/{y}", 52.0 + y * 0.004 + jitter[x, y, 1],
                              11.0 + x * 0.006 + jitter[x, y, 0], zone_ids[zone_of[x, y]], "", "",
                              int(rng.choice([60, 90, 120]))))
    trips = []
    for i in range(params.trunk_lines):
        # trunk lines run along a full row or column and stop at every other cell
        if i % 2 == 0:
            y = int(rng.integers(h))
            cells = [(x, y) for x in range(0, w, 2)]
        else:
            x = int(rng.integers(w))
            cells = [(x, y) for y in range(0, h, 2)]
        if i % 4 >= 2:
            cells.reverse()
        hops = [int(rng.integers(100, 140)) for _ in cells[1:]]
        trips += _trips(rng, f"T{i:02d}", [sid[c] for c in cells], hops, 600, params, dwell=20)
    for i in range(params.bus_lines):
        cells = _walk_line(rng, w, h, int(rng.integers(8, 22)))
        if len(cells) < 3:
            continue
        hops = [int(rng.integers(90, 180)) for _ in cells[1:]]
        headway = int(rng.choice([600, 900, 1200]))
        trips += _trips(rng, f"B{i:03d}", [sid[c] for c in cells], hops, headway, params)
    footpaths = []
    b = params.walk_block
    for bx in range(0, w, b):
        for by in range(0, h, b):
            block = [(x, y) for x in range(bx, min(bx + b, w)) for y in range(by, min(by + b, h))]
            for p in block:
                for q in block:
                    if p != q:
                        steps = abs(p[0] - q[0]) + abs(p[1] - q[1])
                        footpaths.append((sid[p], sid[q], 180 * steps))
    tt = build_timetable(stops, trips, footpaths)
    doc = zonal_fare_doc(zone_ids)
    ftt = prepare(tt, fare_structure(doc))
    return City(params, tt, doc, ftt, footpaths)


def od_queries(ftt: FareTimetable, n: int, seed: int = 0, window: tuple[int, int] = (7 * 3600, 8 * 3600),
               **query_fields) -> tuple[list[Query], int]:
    """Uniform random OD pairs with departures in ``window``; unreachable pairs are dropped.

    Returns the queries and the number of dropped pairs.
    """
    rng = np.random.default_rng(seed)
    out, dropped = [], 0
    while len(out) < n:
        o, t = (int(v) for v in rng.choice(len(ftt.stops), size=2, replace=False))
        dep = int(rng.integers(window[0], window[1] + 1))
        if not raptor(ftt, o, t, dep, 25).anchors:
            dropped += 1
            if dropped > 50 * n:
                break
            continue
        out.append(Query(ftt.stops[o].stop_id, ftt.stops[t].stop_id, dep, **query_fields))
    return out, dropped
