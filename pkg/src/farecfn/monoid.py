"""Product monoids of ordered components.

A weight is stored as a plain tuple with one entry per component:

* ``counter`` and ``saturating_counter`` hold non-negative ints,
* ``finite_set`` holds an int bitmask over the declared universe (Python ints
  are unbounded, so universes of any size work),
* ``indicator`` holds 0 or 1.

Addition and the partial order act componentwise.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

KINDS = ("counter", "saturating_counter", "finite_set", "indicator")

MonoidValue = tuple


class StructuralError(ValueError):
    """A value or document does not fit the declared structure."""


class CapabilityError(RuntimeError):
    """The requested operation is not available for this input."""


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: str
    cap: int | None = None
    universe: tuple[str, ...] = ()
    unit: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructuralError(f"unknown component kind {self.kind!r}")
        if not self.name.isidentifier():
            raise StructuralError(f"component name {self.name!r} is not an identifier")
        if self.kind == "saturating_counter":
            if self.cap is None or self.cap < 0:
                raise StructuralError(f"{self.name}: saturating_counter needs cap >= 0")
        if self.kind == "finite_set":
            object.__setattr__(self, "universe", tuple(str(u) for u in self.universe))
            if not self.universe:
                raise StructuralError(f"{self.name}: finite_set universe is empty")
            if len(set(self.universe)) != len(self.universe):
                raise StructuralError(f"{self.name}: finite_set universe has duplicates")

    @property
    def finite(self) -> bool:
        return self.kind != "counter"

    def domain_size(self) -> int | None:
        if self.kind == "counter":
            return None
        if self.kind == "saturating_counter":
            return self.cap + 1
        if self.kind == "finite_set":
            return 1 << len(self.universe)
        return 2

    def domain(self) -> range:
        """All raw values of a finite component, in ascending numeric order."""
        size = self.domain_size()
        if size is None:
            raise CapabilityError(f"component {self.name!r} is an unbounded counter")
        return range(size)

    def atom_bit(self, atom: str) -> int:
        try:
            return 1 << self.universe.index(str(atom))
        except ValueError:
            raise StructuralError(f"{atom!r} is not in the universe of {self.name!r}") from None

    def to_raw(self, value: Any) -> int:
        """Convert a document value (int, list of atoms, bool) to the raw form."""
        if self.kind == "finite_set":
            if isinstance(value, int) and not isinstance(value, bool):
                raw = value
            else:
                raw = 0
                for atom in value or ():
                    raw |= self.atom_bit(atom)
            if raw < 0 or raw >> len(self.universe):
                raise StructuralError(f"{self.name}: bitmask out of range")
            return raw
        raw = int(value)
        if raw < 0:
            raise StructuralError(f"{self.name}: negative value {raw}")
        if self.kind == "saturating_counter" and raw > self.cap:
            raise StructuralError(f"{self.name}: {raw} exceeds cap {self.cap}")
        if self.kind == "indicator" and raw > 1:
            raise StructuralError(f"{self.name}: indicator must be 0 or 1")
        return raw

    def from_raw(self, raw: int) -> Any:
        if self.kind == "finite_set":
            return [a for i, a in enumerate(self.universe) if raw >> i & 1]
        return raw

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == "saturating_counter":
            out["cap"] = self.cap
        if self.kind == "finite_set":
            out["universe"] = list(self.universe)
        if self.unit:
            out["unit"] = self.unit
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentSpec":
        return cls(
            name=d["name"],
            kind=d["kind"],
            cap=d.get("cap"),
            universe=tuple(d.get("universe", ())),
            unit=d.get("unit", ""),
        )


def _adder(c: ComponentSpec):
    if c.kind == "counter":
        return lambda a, b: a + b
    if c.kind == "saturating_counter":
        cap = c.cap
        return lambda a, b: min(cap, a + b)
    return lambda a, b: a | b


def _leq(c: ComponentSpec):
    if c.kind == "finite_set":
        return lambda a, b: a & ~b == 0
    return lambda a, b: a <= b


@dataclass(frozen=True)
class MonoidSpec:
    components: tuple[ComponentSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise StructuralError("component names must be unique")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})
        kinds = tuple(c.kind for c in self.components)
        # Fast paths for the common homogeneous layouts keep the router cheap.
        adders = [_adder(c) for c in self.components]
        leqs = [_leq(c) for c in self.components]
        object.__setattr__(self, "_adders", adders)
        object.__setattr__(self, "_leqs", leqs)
        object.__setattr__(self, "_kinds", kinds)

    # -- structure -----------------------------------------------------
    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.components)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise StructuralError(f"unknown monoid component {name!r}") from None

    def component(self, name: str) -> ComponentSpec:
        return self.components[self.index(name)]

    @property
    def finite(self) -> bool:
        return all(c.finite for c in self.components)

    def size(self) -> int | None:
        total = 1
        for c in self.components:
            n = c.domain_size()
            if n is None:
                return None
            total *= n
        return total

    # -- algebra -------------------------------------------------------
    def zero(self) -> MonoidValue:
        return (0,) * len(self.components)

    def check(self, v: MonoidValue) -> MonoidValue:
        if not isinstance(v, tuple) or len(v) != len(self.components):
            raise StructuralError(f"value {v!r} does not match monoid arity {len(self.components)}")
        for c, x in zip(self.components, v):
            c.to_raw(x)
        return v

    def add(self, a: MonoidValue, b: MonoidValue) -> MonoidValue:
        return tuple(f(x, y) for f, x, y in zip(self._adders, a, b))

    def leq(self, a: MonoidValue, b: MonoidValue) -> bool:
        for f, x, y in zip(self._leqs, a, b):
            if not f(x, y):
                return False
        return True

    def leq_masked(self, a: MonoidValue, b: MonoidValue, keep: Sequence[int]) -> bool:
        leqs = self._leqs
        for i in keep:
            if not leqs[i](a[i], b[i]):
                return False
        return True

    # -- conversion ----------------------------------------------------
    def value(self, mapping: dict | None = None, **kw) -> MonoidValue:
        """Build a value from ``{component: document value}``; missing entries are neutral."""
        given = dict(mapping or {}, **kw)
        out = [0] * len(self.components)
        for name, v in given.items():
            i = self.index(name)
            out[i] = self.components[i].to_raw(v)
        return tuple(out)

    def to_doc(self, v: MonoidValue) -> dict:
        return {c.name: c.from_raw(x) for c, x in zip(self.components, v)}

    def format(self, v: MonoidValue) -> str:
        parts = []
        for c, x in zip(self.components, v):
            if c.kind == "finite_set":
                parts.append("{" + ",".join(c.from_raw(x)) + "}")
            else:
                parts.append(str(x))
        return "(" + ", ".join(parts) + ")"

    # -- enumeration and sampling --------------------------------------
    def enumerate(self) -> Iterator[MonoidValue]:
        """Every element of a finite monoid."""
        if not self.finite:
            bad = [c.name for c in self.components if not c.finite]
            raise CapabilityError(f"monoid has unbounded components {bad}")
        return itertools.product(*(c.domain() for c in self.components))

    def unit_steps(self, v: MonoidValue) -> Iterator[MonoidValue]:
        """Values covering ``v``: one component raised by one elementary step.

        Every pair ``a <= b`` is joined by a chain of such steps, which is what
        the exhaustive checks rely on.
        """
        for i, c in enumerate(self.components):
            x = v[i]
            if c.kind == "counter":
                nxt = [x + 1]
            elif c.kind == "saturating_counter":
                nxt = [x + 1] if x < c.cap else []
            elif c.kind == "indicator":
                nxt = [1] if x == 0 else []
            else:
                nxt = [x | (1 << j) for j in range(len(c.universe)) if not x >> j & 1]
            for y in nxt:
                yield v[:i] + (y,) + v[i + 1:]

    def random(self, rng: random.Random, scale: Sequence[int] | None = None) -> MonoidValue:
        """A random element; ``scale[i]`` bounds draws for unbounded counters."""
        out = []
        for i, c in enumerate(self.components):
            if c.kind == "counter":
                hi = scale[i] if scale else 10
                out.append(rng.randint(0, hi))
            else:
                out.append(rng.randrange(c.domain_size()))
        return tuple(out)

    def random_sparse(self, rng: random.Random, scale: Sequence[int] | None = None) -> MonoidValue:
        """A random element where each component is neutral with probability 1/2."""
        v = self.random(rng, scale)
        return tuple(x if rng.random() < 0.5 else 0 for x in v)

    def random_columns(self, gen: np.random.Generator, n: int, scale: Sequence[int] | None = None,
                       sparse: bool = False) -> list[np.ndarray]:
        """``n`` random elements as one array per component (object dtype for wide sets)."""
        cols = []
        for i, c in enumerate(self.components):
            if c.kind == "counter":
                col = gen.integers(0, (scale[i] if scale else 10) + 1, n)
            elif c.kind == "finite_set" and len(c.universe) > 62:
                bits = np.packbits(gen.random((n, len(c.universe))) < 0.5, axis=1, bitorder="little")
                col = np.array([int.from_bytes(row.tobytes(), "little") for row in bits], dtype=object)
            else:
                col = gen.integers(0, c.domain_size(), n)
            if sparse:
                col = np.where(gen.random(n) < 0.5, col, 0)
            cols.append(col)
        return cols

    def add_columns(self, a: list[np.ndarray], b: list[np.ndarray]) -> list[np.ndarray]:
        out = []
        for c, x, y in zip(self.components, a, b):
            if c.kind == "counter":
                out.append(x + y)
            elif c.kind == "saturating_counter":
                out.append(np.minimum(x + y, c.cap))
            else:
                out.append(x | y)
        return out

    @staticmethod
    def rows(cols: list[np.ndarray]) -> list[MonoidValue]:
        return list(zip(*(col.tolist() for col in cols)))

    def to_dict(self) -> list:
        return [c.to_dict() for c in self.components]

    @classmethod
    def from_dict(cls, items: list) -> "MonoidSpec":
        return cls(tuple(ComponentSpec.from_dict(d) for d in items))


def monoid_zero(spec: MonoidSpec) -> MonoidValue:
    return spec.zero()


def monoid_add(spec: MonoidSpec, a: MonoidValue, b: MonoidValue) -> MonoidValue:
    spec.check(a)
    spec.check(b)
    return spec.add(a, b)


def monoid_leq(spec: MonoidSpec, a: MonoidValue, b: MonoidValue) -> bool:
    spec.check(a)
    spec.check(b)
    return spec.leq(a, b)
