"""The fare-structure document: load, validate, dump.

The document is a key-value tree (YAML or JSON) with the sections

``monoid``
    list of components ``{name, kind, cap?, universe?, unit?}``
``events``
    list of event symbols; ``noop_event`` names the one that never fires
    (default ``s0``)
``tickets``
    list of ``{id, price, fss_ignore?}``; prices are decimal strings
``edges``
    list of ``{from, to, priority, guard}`` with guards in prefix notation
``initial_state``
    first-match rules ``{when?, ticket, weight?}`` giving the starting fare
    state of a stop
``annotation``
    ``ride`` and ``board`` sections, each ``{weight, events}`` where
    ``events`` is a first-match list of ``{when?, event}``
``partition`` (optional)
    ``{full?, partial?, none?}`` ticket lists asserted by configuration

Rule conditions (``when``) are lists of ``[lhs, op, rhs]`` clauses joined by
AND.  Operands are ``cur.<attr>``, ``prev.<attr>`` or literals; ``op`` is
``==`` or ``!=``.  Stop attributes are ``stop_id``, ``name``, ``zone``
(the zone the stop counts as on this route copy), ``zone_id``,
``overlap_id`` and ``city_id``; missing attributes read as ``""``.

Weight bindings map component names to an int, a list of atoms, or one of
``$distance`` (metres travelled on the arc) and ``$zone`` (``{zone}``).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .guards import GuardSyntaxError
from .monoid import MonoidSpec, StructuralError
from .tickets import (
    CheckMode,
    ComparabilityPartition,
    TicketGraph,
    ValidationReport,
    build_graph,
    compute_partition,
    validate_graph,
)

SECTIONS = ("monoid", "events", "noop_event", "tickets", "edges", "initial_state",
            "annotation", "partition")
STOP_ATTRS = ("stop_id", "name", "zone", "zone_id", "overlap_id", "city_id")
BINDINGS = ("$distance", "$zone")


class InvalidDocument(StructuralError):
    def __init__(self, report: ValidationReport):
        self.report = report
        msgs = "; ".join(e["message"] for e in report.errors)
        super().__init__(f"invalid fare document: {msgs}")


@dataclass(frozen=True)
class Rule:
    when: tuple = ()
    ticket: str | None = None
    event: str | None = None
    weight: tuple = ()  # (component, binding) pairs

    def matches(self, prev: dict | None, cur: dict) -> bool:
        for lhs, op, rhs in self.when:
            a, b = _operand(lhs, prev, cur), _operand(rhs, prev, cur)
            if (a == b) != (op == "=="):
                return False
        return True


def _operand(x, prev, cur):
    if isinstance(x, str):
        if x.startswith("cur."):
            return str(cur.get(x[4:], "") or "")
        if x.startswith("prev."):
            return str((prev or {}).get(x[5:], "") or "")
    return str(x)


@dataclass(frozen=True)
class ArcRules:
    weight: tuple = ()
    events: tuple = ()


@dataclass
class FareStructure:
    """A validated fare document, ready for annotating timetables."""

    monoid: MonoidSpec
    graph: TicketGraph
    initial_rules: tuple
    ride: ArcRules
    board: ArcRules
    asserted: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    # -- rule evaluation ---------------------------------------------
    def bind(self, weight: tuple, distance: int, zone: str | None):
        vals = {}
        for name, b in weight:
            if b == "$distance":
                c = self.monoid.component(name)
                # min(cap, h + d) == min(cap, h + min(cap, d))
                vals[name] = min(int(distance), c.cap) if c.cap is not None else int(distance)
            elif b == "$zone":
                vals[name] = [zone] if zone else []
            else:
                vals[name] = b
        return self.monoid.value(vals)

    def arc_event(self, rules: ArcRules, prev: dict | None, cur: dict) -> str:
        for r in rules.events:
            if r.matches(prev, cur):
                return r.event
        return self.graph.noop_event

    def initial_state(self, stop: dict) -> tuple[str, tuple]:
        for r in self.initial_rules:
            if r.matches(None, stop):
                return r.ticket, self.bind(r.weight, 0, stop.get("zone"))
        raise StructuralError(f"no initial_state rule matches stop {stop.get('stop_id')!r}")

    def partition(self, mode: CheckMode = CheckMode()) -> ComparabilityPartition:
        return compute_partition(self.graph, mode, self.asserted)

    def to_document(self) -> dict:
        return copy.deepcopy(self.document)


def _rules(items, report: ValidationReport, kind: str, monoid, events, tickets) -> tuple:
    out = []
    for n, d in enumerate(items or ()):
        where = f"{kind}[{n}]"
        when = []
        for clause in d.get("when", ()) or ():
            if not (isinstance(clause, (list, tuple)) and len(clause) == 3
                    and clause[1] in ("==", "!=")):
                report.error("bad_rule", f"{where}: clause {clause!r} is not [lhs, ==|!=, rhs]")
                continue
            for side in (clause[0], clause[2]):
                if isinstance(side, str) and side.split(".", 1)[0] in ("cur", "prev"):
                    attr = side.split(".", 1)[1] if "." in side else ""
                    if attr not in STOP_ATTRS:
                        report.error("bad_rule", f"{where}: unknown stop attribute {side!r}")
            when.append(tuple(clause))
        weight = []
        for comp, b in (d.get("weight") or {}).items():
            try:
                c = monoid.component(comp)
            except StructuralError as exc:
                report.error("unknown_component", f"{where}: {exc}")
                continue
            if isinstance(b, str) and b.startswith("$"):
                if b not in BINDINGS:
                    report.error("bad_binding", f"{where}: unknown binding {b!r}")
                elif b == "$zone" and c.kind != "finite_set":
                    report.error("bad_binding", f"{where}: $zone needs a finite_set component")
                elif b == "$distance" and c.kind not in ("counter", "saturating_counter"):
                    report.error("bad_binding", f"{where}: $distance needs a counter component")
            else:
                try:
                    c.to_raw(b)
                except StructuralError as exc:
                    report.error("bad_binding", f"{where}: {exc}")
            weight.append((comp, b if not isinstance(b, list) else tuple(b)))
        ticket = d.get("ticket")
        if kind == "initial_state":
            if ticket not in tickets:
                report.error("unknown_ticket", f"{where}: unknown ticket {ticket!r}")
        event = d.get("event")
        if kind != "initial_state" and event not in events:
            report.error("unknown_event", f"{where}: undeclared event {event!r}")
        out.append(Rule(tuple(when), ticket, event,
                        tuple((k, list(v) if isinstance(v, tuple) else v) for k, v in weight)))
    return tuple(out)


def validate_cfn(doc: dict) -> ValidationReport:
    """Check a parsed document; never raises on content problems."""
    report = ValidationReport()
    _build(doc, report)
    return report


def _build(doc: dict, report: ValidationReport) -> FareStructure | None:
    if not isinstance(doc, dict):
        report.error("not_a_mapping", "fare document must be a mapping")
        return None
    for key in doc:
        if key not in SECTIONS:
            report.warn("unknown_section", f"unknown section {key!r} ignored")
    try:
        monoid = MonoidSpec.from_dict(doc.get("monoid") or [])
    except (StructuralError, KeyError, TypeError) as exc:
        report.error("bad_monoid", str(exc))
        return None
    events = list(doc.get("events") or [])
    noop = doc.get("noop_event", "s0")
    if noop not in events:
        events.append(noop)
    if len(set(events)) != len(events):
        report.error("duplicate_event", "event symbols must be unique")
    tickets = doc.get("tickets") or []
    if not tickets:
        report.error("no_tickets", "the ticket set is empty")
        return None
    try:
        graph = build_graph(monoid, tickets, doc.get("edges") or [], events, noop)
    except GuardSyntaxError as exc:
        report.error("bad_guard", str(exc))
        return None
    except (StructuralError, KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        report.error("bad_graph", str(exc))
        return None
    validate_graph(graph, report)
    ids = set(graph.ids)
    initial = _rules(doc.get("initial_state"), report, "initial_state", monoid, events, ids)
    if not initial:
        report.error("no_initial_state", "initial_state needs at least one rule")
    ann = doc.get("annotation") or {}
    arc = {}
    for part in ("ride", "board"):
        sec = ann.get(part) or {}
        w = _rules([{"weight": sec.get("weight") or {}, "event": noop}], report,
                   f"annotation.{part}.weight", monoid, events, ids)
        evs = _rules(sec.get("events"), report, f"annotation.{part}.events", monoid, events, ids)
        arc[part] = ArcRules(w[0].weight if w else (), evs)
    asserted = doc.get("partition") or {}
    for cls, items in asserted.items():
        if cls not in ("full", "partial", "none"):
            report.error("bad_partition", f"unknown partition class {cls!r}")
        for t in items or ():
            if t not in ids:
                report.error("unknown_ticket", f"partition.{cls}: unknown ticket {t!r}")
    if not report.valid:
        return None
    return FareStructure(monoid, graph, initial, arc["ride"], arc["board"],
                         {k: list(v) for k, v in asserted.items()}, copy.deepcopy(doc))


def fare_structure(doc: dict) -> FareStructure:
    report = ValidationReport()
    fs = _build(doc, report)
    if fs is None:
        raise InvalidDocument(report)
    return fs


def read_document(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    return yaml.safe_load(text)


def load_fare_document(path: str | Path) -> FareStructure:
    return fare_structure(read_document(path))


def dump_document(doc: dict, path: str | Path | None = None, fmt: str = "yaml") -> str:
    """Serialize a document; the output reads back to an equal mapping."""
    if fmt == "json":
        text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    else:
        text = yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text

