"""Timetables: CSV loading, route building, footpath closure, overlap areas and
fare annotation.

A dataset directory holds ``stops.csv``, ``trips.csv``, ``stop_times.csv``,
``footpaths.csv``, optionally ``overlaps.csv``, and a fare document
(``fare.yaml`` or ``fare.json``).  Times are integer seconds.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .document import FareStructure, dump_document, load_fare_document, read_document
from .monoid import StructuralError


class TimetableError(ValueError):
    def __init__(self, msg: str, file: str | None = None, line: int | None = None):
        self.file, self.line = file, line
        where = f"{file}:{line}: " if file and line else f"{file}: " if file else ""
        super().__init__(where + msg)


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str = ""
    lat: float = 0.0
    lon: float = 0.0
    zone_id: str = ""
    overlap_id: str = ""
    city_id: str = ""
    transfer_time: int = 0

    def attrs(self, zone: str | None = None) -> dict:
        return {
            "stop_id": self.stop_id, "name": self.name, "zone_id": self.zone_id,
            "overlap_id": self.overlap_id, "city_id": self.city_id,
            "zone": self.zone_id if zone is None else zone,
        }


@dataclass(frozen=True)
class Trip:
    trip_id: str
    stops: tuple[str, ...]
    arr: tuple[int, ...]
    dep: tuple[int, ...]
    dist: tuple[int, ...] | None = None  # cumulative metres, if the feed has them
    route_hint: str = ""


@dataclass
class Route:
    """Trips sharing a stop sequence, none overtaking another, sorted by time."""

    route_id: str
    stops: tuple[int, ...]
    trips: list[Trip]
    zones: tuple[str, ...] = ()

    def __post_init__(self):
        self.trips.sort(key=lambda t: (t.dep[0], t.arr[-1], t.trip_id))


@dataclass
class Timetable:
    stops: list[Stop]
    routes: list[Route]
    footpaths: list[tuple[int, int, int]]
    overlaps: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {s.stop_id: i for i, s in enumerate(self.stops)}

    def stop_index(self, stop_id: str) -> int:
        try:
            return self.index[stop_id]
        except KeyError:
            raise KeyError(f"unknown stop {stop_id!r}") from None

    @property
    def trips(self) -> list[Trip]:
        return [t for r in self.routes for t in r.trips]


# -- building --------------------------------------------------------

def _check_trip(t: Trip, file="stop_times.csv", line=None):
    for i in range(len(t.stops)):
        if t.arr[i] > t.dep[i]:
            raise TimetableError(f"trip {t.trip_id}: arrival after departure at {t.stops[i]}",
                                 file, line)
        if i and t.dep[i - 1] > t.arr[i]:
            raise TimetableError(f"trip {t.trip_id}: times decrease at {t.stops[i]}", file, line)
        if t.dist and i and t.dist[i] < t.dist[i - 1]:
            raise TimetableError(f"trip {t.trip_id}: distance decreases at {t.stops[i]}",
                                 file, line)


def _overtakes(a: Trip, b: Trip) -> bool:
    """True unless ``a`` is no later than ``b`` at every stop."""
    return any(x > y for x, y in zip(a.arr, b.arr)) or any(x > y for x, y in zip(a.dep, b.dep))


def group_routes(stops: Sequence[Stop], trips: Iterable[Trip]) -> list[Route]:
    """Group trips by stop sequence and split overtaking trips into extra routes."""
    index = {s.stop_id: i for i, s in enumerate(stops)}
    by_seq: dict[tuple, list[Trip]] = {}
    for t in trips:
        by_seq.setdefault(t.stops, []).append(t)
    routes: list[Route] = []
    for seq, ts in by_seq.items():
        chains: list[list[Trip]] = []
        for t in sorted(ts, key=lambda t: (t.dep[0], t.arr[-1], t.trip_id)):
            for ch in chains:
                if not _overtakes(ch[-1], t):
                    ch.append(t)
                    break
            else:
                chains.append([t])
        hint = ts[0].route_hint or "r"
        for n, ch in enumerate(chains):
            rid = f"{hint}" if len(chains) == 1 else f"{hint}#{n}"
            routes.append(Route(rid, tuple(index[s] for s in seq), ch))
    # unique route ids
    seen: dict[str, int] = {}
    for r in routes:
        k = seen.get(r.route_id, 0)
        seen[r.route_id] = k + 1
        if k:
            r.route_id = f"{r.route_id}~{k}"
    for r in routes:
        r.zones = tuple(stops[i].zone_id for i in r.stops)
    return routes


def build_timetable(stops: Sequence[Stop], trips: Iterable[Trip],
                    footpaths: Iterable[tuple[str, str, int]] = (),
                    overlaps: dict[str, Sequence[str]] | None = None,
                    close: bool = True) -> Timetable:
    """In-memory constructor with the same checks as :func:`load_timetable`."""
    stops = list(stops)
    index = {s.stop_id: i for i, s in enumerate(stops)}
    if len(index) != len(stops):
        raise TimetableError("duplicate stop ids")
    trips = list(trips)
    for t in trips:
        for s in t.stops:
            if s not in index:
                raise TimetableError(f"trip {t.trip_id} references unknown stop {s!r}")
        _check_trip(t)
    fps = []
    for a, b, d in footpaths:
        if a not in index or b not in index:
            raise TimetableError(f"footpath {a}->{b} references an unknown stop")
        if d < 0:
            raise TimetableError(f"footpath {a}->{b} has negative duration")
        fps.append((index[a], index[b], int(d)))
    if close:
        fps = close_footpaths(fps)
    ov = {k: tuple(v) for k, v in (overlaps or {}).items()}
    return Timetable(stops, group_routes(stops, trips), fps, ov)


def close_footpaths(footpaths: Iterable[tuple]) -> list[tuple]:
    """Transitive closure keeping the shortest composite duration per pair.

    Pairs are directed; symmetry is not added.  Self-loops are dropped.
    """
    adj: dict = {}
    for a, b, d in footpaths:
        if a == b:
            continue
        cur = adj.setdefault(a, {})
        if b not in cur or d < cur[b]:
            cur[b] = d
    out = []
    for src in sorted(adj, key=str):
        dist = {src: 0}
        heap = [(0, str(src), src)]
        while heap:
            d, _, v = heapq.heappop(heap)
            if d > dist.get(v, math.inf):
                continue
            for w, l in adj.get(v, {}).items():
                nd = d + l
                if nd < dist.get(w, math.inf):
                    dist[w] = nd
                    heapq.heappush(heap, (nd, str(w), w))
        for w, d in dist.items():
            if w != src:
                out.append((src, w, d))
    out.sort(key=lambda x: (str(x[0]), str(x[1])))
    return out


# -- CSV I/O -----------------------------------------------------------

def _rows(path: Path):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for n, row in enumerate(reader, start=2):
            yield n, {k.strip(): (v or "").strip() for k, v in row.items() if k}


def _int(row, key, file, line, default=None):
    v = row.get(key, "")
    if v == "":
        if default is not None:
            return default
        raise TimetableError(f"missing {key}", file, line)
    try:
        return int(v)
    except ValueError:
        raise TimetableError(f"{key} must be an integer, got {v!r}", file, line) from None


def load_timetable(path: str | Path, close: bool = True) -> Timetable:
    path = Path(path)
    for name in ("stops.csv", "trips.csv", "stop_times.csv", "footpaths.csv"):
        if not (path / name).exists():
            raise TimetableError("missing file", name)
    stops = []
    for n, row in _rows(path / "stops.csv"):
        if not row.get("stop_id"):
            raise TimetableError("missing stop_id", "stops.csv", n)
        try:
            lat = float(row.get("lat") or 0)
            lon = float(row.get("lon") or 0)
        except ValueError:
            raise TimetableError("bad coordinates", "stops.csv", n) from None
        stops.append(Stop(row["stop_id"], row.get("name", ""), lat, lon, row.get("zone_id", ""),
                          row.get("overlap_id", ""), row.get("city_id", ""),
                          _int(row, "transfer_time_s", "stops.csv", n, 0)))
    index = {s.stop_id for s in stops}
    hints = {}
    for n, row in _rows(path / "trips.csv"):
        if not row.get("trip_id"):
            raise TimetableError("missing trip_id", "trips.csv", n)
        hints[row["trip_id"]] = row.get("route_hint", "")
    rows: dict[str, list] = {}
    for n, row in _rows(path / "stop_times.csv"):
        tid = row.get("trip_id", "")
        if tid not in hints:
            raise TimetableError(f"unknown trip {tid!r}", "stop_times.csv", n)
        if row.get("stop_id") not in index:
            raise TimetableError(f"unknown stop {row.get('stop_id')!r}", "stop_times.csv", n)
        dist = row.get("dist_m", "")
        rows.setdefault(tid, []).append((
            _int(row, "seq", "stop_times.csv", n), row["stop_id"],
            _int(row, "arr_s", "stop_times.csv", n), _int(row, "dep_s", "stop_times.csv", n),
            int(dist) if dist != "" else None, n))
    trips = []
    for tid, rs in rows.items():
        rs.sort()
        d = tuple(r[4] for r in rs)
        trip = Trip(tid, tuple(r[1] for r in rs), tuple(r[2] for r in rs),
                    tuple(r[3] for r in rs), d if all(x is not None for x in d) else None,
                    hints[tid])
        if len(rs) < 2:
            raise TimetableError(f"trip {tid} has fewer than two stops", "stop_times.csv", rs[0][5])
        _check_trip(trip, "stop_times.csv", rs[-1][5])
        trips.append(trip)
    fps = []
    for n, row in _rows(path / "footpaths.csv"):
        a, b = row.get("from", ""), row.get("to", "")
        if a not in index or b not in index:
            raise TimetableError(f"footpath {a}->{b} references an unknown stop", "footpaths.csv", n)
        d = _int(row, "duration_s", "footpaths.csv", n)
        if d < 0:
            raise TimetableError("negative footpath duration", "footpaths.csv", n)
        fps.append((a, b, d))
    overlaps: dict[str, list] = {}
    if (path / "overlaps.csv").exists():
        for n, row in _rows(path / "overlaps.csv"):
            overlaps.setdefault(row["overlap_id"], []).append(row["zone_id"])
    return build_timetable(stops, trips, fps, overlaps, close)


def write_timetable(tt: Timetable, path: str | Path, raw_footpaths=None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with (path / "stops.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stop_id", "name", "lat", "lon", "zone_id", "overlap_id", "city_id",
                    "transfer_time_s"])
        for s in tt.stops:
            w.writerow([s.stop_id, s.name, s.lat, s.lon, s.zone_id, s.overlap_id, s.city_id,
                        s.transfer_time])
    trips = sorted({t.trip_id: t for t in tt.trips}.values(), key=lambda t: t.trip_id)
    with (path / "trips.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trip_id", "route_hint"])
        for t in trips:
            w.writerow([t.trip_id, t.route_hint])
    with (path / "stop_times.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trip_id", "seq", "stop_id", "arr_s", "dep_s", "dist_m"])
        for t in trips:
            for i, s in enumerate(t.stops):
                w.writerow([t.trip_id, i, s, t.arr[i], t.dep[i], t.dist[i] if t.dist else ""])
    with (path / "footpaths.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["from", "to", "duration_s"])
        for a, b, d in (raw_footpaths if raw_footpaths is not None else tt.footpaths):
            w.writerow([tt.stops[a].stop_id if isinstance(a, int) else a,
                        tt.stops[b].stop_id if isinstance(b, int) else b, d])
    if tt.overlaps:
        with (path / "overlaps.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["overlap_id", "zone_id"])
            for k, zs in tt.overlaps.items():
                for z in zs:
                    w.writerow([k, z])


# -- overlap areas ---------------------------------------------------

def overlap_blocks(tt: Timetable, route: Route, overlap_map) -> list[tuple[int, int, str]]:
    """Maximal runs ``(start, end, overlap_id)`` of consecutive stops in one area."""
    blocks = []
    i, n = 0, len(route.stops)
    while i < n:
        oid = tt.stops[route.stops[i]].overlap_id
        if oid and len(overlap_map.get(oid, ())) >= 2:
            j = i
            while j + 1 < n and tt.stops[route.stops[j + 1]].overlap_id == oid:
                j += 1
            blocks.append((i, j, oid))
            i = j + 1
        else:
            i += 1
    return blocks


def duplicate_overlap_routes(tt: Timetable, overlap_map: dict | None = None) -> Timetable:
    """One route copy per zone assignment of the overlap blocks of each route."""
    overlap_map = {k: tuple(v) for k, v in (overlap_map if overlap_map is not None
                                              else tt.overlaps).items()}
    for k, zs in overlap_map.items():
        if len(zs) < 2:
            raise StructuralError(f"overlap area {k!r} needs at least two zones")
    routes = []
    for r in tt.routes:
        blocks = overlap_blocks(tt, r, overlap_map)
        if not blocks:
            routes.append(r)
            continue
        for combo in itertools.product(*(overlap_map[b[2]] for b in blocks)):
            zones = list(r.zones)
            for (a, b, _), z in zip(blocks, combo):
                for i in range(a, b + 1):
                    zones[i] = z
            rid = r.route_id + "@" + "/".join(combo)
            routes.append(Route(rid, r.stops, list(r.trips), tuple(zones)))
    return Timetable(tt.stops, routes, tt.footpaths, overlap_map)


# -- fare annotation -------------------------------------------------

def haversine_m(a: Stop, b: Stop) -> int:
    r = 6371008.8
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dp, dl = p2 - p1, math.radians(b.lon - a.lon)
    x = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return round(2 * r * math.asin(min(1.0, math.sqrt(x))))


@dataclass
class FareRoute:
    route_id: str
    stops: tuple[int, ...]
    trip_ids: list[str]
    arr: list[tuple[int, ...]]
    dep: list[tuple[int, ...]]
    zones: tuple[str, ...]
    ride_w: tuple  # per position; position 0 unused (neutral)
    ride_e: tuple
    board_w: tuple
    board_e: tuple
    dep_cols: list = field(default_factory=list)
    arr_cols: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.stops)
        self.dep_cols = [[d[i] for d in self.dep] for i in range(n)]
        self.arr_cols = [[a[i] for a in self.arr] for i in range(n)]

    def earliest_trip(self, pos: int, t: int) -> int | None:
        k = bisect_left(self.dep_cols[pos], t)
        return k if k < len(self.trip_ids) else None

    def latest_trip_arriving(self, pos: int, t: int) -> int | None:
        """Index of the last trip with arrival at ``pos`` no later than ``t``."""
        k = bisect_right(self.arr_cols[pos], t) - 1
        return k if k >= 0 else None


@dataclass
class FareTimetable:
    """Routes with per-stop fare annotations plus initial fare states."""

    stops: list[Stop]
    routes: list[FareRoute]
    footpaths: list[tuple[int, int, int]]
    fares: FareStructure
    initial: list[tuple]  # per stop: tuple of (ticket index, weight)
    overlaps: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {s.stop_id: i for i, s in enumerate(self.stops)}
        self.transfer = [s.transfer_time for s in self.stops]
        self.routes_at: list[list[tuple[int, int]]] = [[] for _ in self.stops]
        for r, route in enumerate(self.routes):
            for pos, p in enumerate(route.stops):
                self.routes_at[p].append((r, pos))
        self.walks: list[list[tuple[int, int]]] = [[] for _ in self.stops]
        self.walks_in: list[list[tuple[int, int]]] = [[] for _ in self.stops]
        for a, b, d in self.footpaths:
            self.walks[a].append((b, d))
            self.walks_in[b].append((a, d))

    @property
    def graph(self):
        return self.fares.graph

    @property
    def monoid(self):
        return self.fares.monoid

    def stop_index(self, stop_id: str) -> int:
        try:
            return self.index[stop_id]
        except KeyError:
            raise KeyError(f"unknown stop {stop_id!r}") from None


def _trip_distances(tt: Timetable, route: Route, trip: Trip) -> list[int]:
    n = len(route.stops)
    if trip.dist:
        return [0] + [trip.dist[i] - trip.dist[i - 1] for i in range(1, n)]
    return [0] + [haversine_m(tt.stops[route.stops[i - 1]], tt.stops[route.stops[i]])
                  for i in range(1, n)]


def annotate_fares(tt: Timetable, fares: FareStructure) -> FareTimetable:
    """Attach ride-in and boarding pairs per stop, split routes so that all
    trips of a route share them, and compute initial states per stop."""
    ride, board = fares.ride, fares.board
    out: list[FareRoute] = []
    for r in tt.routes:
        attrs = [tt.stops[p].attrs(z) for p, z in zip(r.stops, r.zones)]
        n = len(r.stops)
        board_w = tuple(fares.bind(board.weight, 0, attrs[i]["zone"]) for i in range(n))
        board_e = tuple(fares.arc_event(board, None, attrs[i]) for i in range(n))
        ride_e = (fares.graph.noop_event,) + tuple(
            fares.arc_event(ride, attrs[i - 1], attrs[i]) for i in range(1, n))
        groups: dict[tuple, list[Trip]] = {}
        for trip in r.trips:
            dist = _trip_distances(tt, r, trip)
            ride_w = (fares.monoid.zero(),) + tuple(
                fares.bind(ride.weight, dist[i], attrs[i]["zone"]) for i in range(1, n))
            groups.setdefault(ride_w, []).append(trip)
        for k, (ride_w, trips) in enumerate(groups.items()):
            rid = r.route_id if len(groups) == 1 else f"{r.route_id}%{k}"
            trips = sorted(trips, key=lambda t: (t.dep[0], t.arr[-1], t.trip_id))
            out.append(FareRoute(rid, r.stops, [t.trip_id for t in trips],
                                 [t.arr for t in trips], [t.dep for t in trips],
                                 r.zones, ride_w, ride_e, board_w, board_e))
    # route id order keeps scans deterministic
    out.sort(key=lambda fr: fr.route_id)
    g = fares.graph
    initial = []
    for s in tt.stops:
        zones = tt.overlaps.get(s.overlap_id) if s.overlap_id else None
        states = []
        for z in (zones if zones and len(zones) >= 2 else (s.zone_id,)):
            t, h = fares.initial_state(s.attrs(z))
            st = (g.index[t], h)
            if st not in states:
                states.append(st)
        initial.append(tuple(states))
    return FareTimetable(list(tt.stops), out, list(tt.footpaths), fares, initial, dict(tt.overlaps))


def prepare(tt: Timetable, fares: FareStructure) -> FareTimetable:
    """Overlap duplication followed by fare annotation."""
    return annotate_fares(duplicate_overlap_routes(tt), fares)


def find_fare_document(path: Path) -> Path:
    for name in ("fare.yaml", "fare.yml", "fare.json"):
        if (path / name).exists():
            return path / name
    raise TimetableError("missing fare document (fare.yaml or fare.json)", str(path))


def load_dataset(path: str | Path) -> FareTimetable:
    path = Path(path)
    return prepare(load_timetable(path), load_fare_document(find_fare_document(path)))


def write_dataset(path: str | Path, tt: Timetable, fare_doc: dict, raw_footpaths=None):
    write_timetable(tt, path, raw_footpaths)
    dump_document(fare_doc, Path(path) / "fare.yaml")


__all__ = [
    "Stop", "Trip", "Route", "Timetable", "TimetableError", "FareRoute", "FareTimetable",
    "build_timetable", "load_timetable", "write_timetable", "close_footpaths",
    "duplicate_overlap_routes", "annotate_fares", "prepare", "load_dataset", "write_dataset",
    "haversine_m", "read_document", "replace",
]
