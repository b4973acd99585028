"""Guard expressions on ticket-graph edges.

Guards are written in prefix notation::

    (and (>= |zones| 2) (or (> dist 4000) (= event tra)))

Atoms are ``(op lhs constant)`` where ``op`` is one of ``< <= = > >=`` and
``lhs`` names a counter component, ``|name|`` (the cardinality of a
finite_set component) or an indicator (compared against 0/1).  Events are
tested with ``(= event sym)`` and ``(!= event sym)``.  ``and``, ``or``,
``not``, ``true`` and ``false`` combine them.  The unicode operators
``≤ ≥ ≠`` are accepted as aliases.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass, field
from typing import Callable

from .monoid import MonoidSpec, StructuralError

_OPS: dict[str, Callable[[int, int], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">": operator.gt,
    ">=": operator.ge,
}
_ALIASES = {"≤": "<=", "≥": ">=", "≠": "!=", "==": "="}
_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


class GuardSyntaxError(StructuralError):
    pass


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise GuardSyntaxError(f"cannot tokenize guard at {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _parse_sexpr(tokens: list[str]):
    def rec(i):
        tok = tokens[i]
        if tok == "(":
            items, i = [], i + 1
            while i < len(tokens) and tokens[i] != ")":
                item, i = rec(i)
                items.append(item)
            if i >= len(tokens):
                raise GuardSyntaxError("unbalanced parenthesis")
            return items, i + 1
        if tok == ")":
            raise GuardSyntaxError("unexpected ')'")
        return tok, i + 1

    if not tokens:
        raise GuardSyntaxError("empty guard")
    tree, end = rec(0)
    if end != len(tokens):
        raise GuardSyntaxError("trailing tokens after guard expression")
    return tree


@dataclass(frozen=True)
class Guard:
    """A parsed, validated guard; ``source`` keeps the text it came from."""

    source: str
    tree: tuple
    components: frozenset = field(default=frozenset())
    events: frozenset = field(default=frozenset())
    # constants compared against, per component; used to steer sampling
    constants: tuple = ()

    @property
    def weight_dependent(self) -> bool:
        return bool(self.components)

    def canonical(self) -> str:
        return _format(self.tree)


def _format(node) -> str:
    tag = node[0]
    if tag == "const":
        return "true" if node[1] else "false"
    if tag in ("and", "or"):
        return "(" + tag + " " + " ".join(_format(c) for c in node[1]) + ")"
    if tag == "not":
        return "(not " + _format(node[1]) + ")"
    if tag == "event":
        return f"({node[1]} event {node[2]})"
    _, op, name, size, const = node
    lhs = f"|{name}|" if size else name
    return f"({op} {lhs} {const})"


def parse_guard(text: str, spec: MonoidSpec, events) -> Guard:
    """Parse ``text`` and check every reference against ``spec`` and ``events``."""
    if not isinstance(text, str):
        raise GuardSyntaxError(f"guard must be a string, got {text!r}")
    events = set(events)
    comps: set[str] = set()
    evs: set[str] = set()
    consts: dict[str, int] = {}

    def build(x):
        if isinstance(x, str):
            if x == "true":
                return ("const", True)
            if x == "false":
                return ("const", False)
            raise GuardSyntaxError(f"bare token {x!r}; atoms must be parenthesized")
        if not x:
            raise GuardSyntaxError("empty list in guard")
        head = x[0]
        if not isinstance(head, str):
            raise GuardSyntaxError("operator expected")
        head = _ALIASES.get(head, head)
        if head in ("and", "or"):
            if len(x) < 2:
                raise GuardSyntaxError(f"{head} needs arguments")
            return (head, tuple(build(c) for c in x[1:]))
        if head == "not":
            if len(x) != 2:
                raise GuardSyntaxError("not takes one argument")
            return ("not", build(x[1]))
        if len(x) != 3 or not all(isinstance(t, str) for t in x[1:]):
            raise GuardSyntaxError(f"malformed atom {x!r}")
        lhs, rhs = x[1], x[2]
        if lhs == "event":
            if head not in ("=", "!="):
                raise GuardSyntaxError("events only support = and !=")
            if rhs not in events:
                raise GuardSyntaxError(f"undeclared event {rhs!r}")
            evs.add(rhs)
            return ("event", head, rhs)
        if head not in _OPS:
            raise GuardSyntaxError(f"unknown comparison {head!r}")
        size = lhs.startswith("|") and lhs.endswith("|") and len(lhs) > 2
        name = lhs[1:-1] if size else lhs
        if name not in spec.names:
            raise GuardSyntaxError(f"unknown monoid component {name!r}")
        comp = spec.component(name)
        if size != (comp.kind == "finite_set"):
            raise GuardSyntaxError(
                f"{lhs}: finite_set components are compared by |name|, others by name"
            )
        try:
            const = int(rhs)
        except ValueError:
            raise GuardSyntaxError(f"constant expected, got {rhs!r}") from None
        if comp.kind == "indicator" and (head != "=" or const not in (0, 1)):
            raise GuardSyntaxError(f"indicator {name} only supports (= {name} 0|1)")
        comps.add(name)
        consts[name] = max(consts.get(name, 0), const)
        return ("cmp", head, name, size, const)

    tree = build(_parse_sexpr(_tokenize(text)))
    return Guard(
        source=text,
        tree=tree,
        components=frozenset(comps),
        events=frozenset(evs),
        constants=tuple(sorted(consts.items())),
    )


def compile_guard(guard: Guard, spec: MonoidSpec) -> Callable[[tuple, str], bool]:
    """Turn a guard into a fast ``f(weight, event) -> bool`` closure."""

    def comp(node):
        tag = node[0]
        if tag == "const":
            val = node[1]
            return lambda h, s: val
        if tag == "and":
            parts = tuple(comp(c) for c in node[1])
            return lambda h, s: all(p(h, s) for p in parts)
        if tag == "or":
            parts = tuple(comp(c) for c in node[1])
            return lambda h, s: any(p(h, s) for p in parts)
        if tag == "not":
            inner = comp(node[1])
            return lambda h, s: not inner(h, s)
        if tag == "event":
            _, op, sym = node
            if op == "=":
                return lambda h, s: s == sym
            return lambda h, s: s != sym
        _, op, name, size, const = node
        i = spec.index(name)
        f = _OPS[op]
        if size:
            return lambda h, s: f(h[i].bit_count(), const)
        return lambda h, s: f(h[i], const)

    return comp(guard.tree)


def eval_guard(guard: Guard, spec: MonoidSpec, h: tuple, s: str) -> bool:
    return compile_guard(guard, spec)(h, s)
