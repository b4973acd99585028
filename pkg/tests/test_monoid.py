import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farecfn.monoid import (
    CapabilityError,
    ComponentSpec,
    MonoidSpec,
    StructuralError,
    monoid_add,
    monoid_leq,
    monoid_zero,
)

ZONES = ["156", "162", "225", "233", "H", "L"]


def mdv_like():
    return MonoidSpec.from_dict([
        {"name": "dist", "kind": "counter", "unit": "metres"},
        {"name": "stops", "kind": "counter"},
        {"name": "zones", "kind": "finite_set", "universe": ZONES},
    ])


def test_zero_of_product():
    m = mdv_like()
    assert monoid_zero(m) == (0, 0, 0)
    assert m.to_doc(m.zero()) == {"dist": 0, "stops": 0, "zones": []}


def test_zero_small_specs():
    assert monoid_zero(MonoidSpec.from_dict([{"name": "x", "kind": "indicator"}])) == (0,)
    assert monoid_zero(MonoidSpec.from_dict([{"name": "h", "kind": "saturating_counter", "cap": 2}])) == (0,)


def test_set_union():
    m = mdv_like()
    a, b = m.value(zones=["233"]), m.value(zones=["156"])
    assert set(m.to_doc(monoid_add(m, a, b))["zones"]) == {"233", "156"}


def test_saturation():
    m = MonoidSpec.from_dict([{"name": "h", "kind": "saturating_counter", "cap": 2}])
    assert monoid_add(m, (1,), (2,)) == (2,)


def test_indicator_is_or():
    m = MonoidSpec.from_dict([{"name": "x", "kind": "indicator"}])
    assert m.add((1,), (1,)) == (1,)
    assert m.add((0,), (1,)) == (1,)


def test_order_examples():
    m = MonoidSpec.from_dict([
        {"name": "zones", "kind": "finite_set", "universe": ZONES},
        {"name": "n", "kind": "counter"},
    ])
    a = m.value(zones=["233"], n=2)
    b = m.value(zones=["233", "156"], n=3)
    assert monoid_leq(m, a, b) and not monoid_leq(m, b, a)
    c, d = m.value(zones=["233"]), m.value(zones=["156"])
    assert not monoid_leq(m, c, d) and not monoid_leq(m, d, c)
    assert monoid_leq(m, a, a)


def test_arity_mismatch_raises():
    m = mdv_like()
    with pytest.raises(StructuralError):
        monoid_add(m, (0, 0), (0, 0, 0))
    with pytest.raises(StructuralError):
        monoid_leq(m, (0, 0, 0), (0, 0))


@pytest.mark.parametrize("bad", [
    {"name": "h", "kind": "saturating_counter"},
    {"name": "h", "kind": "saturating_counter", "cap": -1},
    {"name": "z", "kind": "finite_set", "universe": []},
    {"name": "z", "kind": "finite_set", "universe": ["a", "a"]},
    {"name": "q", "kind": "real"},
    {"name": "not an id", "kind": "counter"},
])
def test_bad_components(bad):
    with pytest.raises(StructuralError):
        MonoidSpec.from_dict([bad])


def test_duplicate_names():
    with pytest.raises(StructuralError):
        MonoidSpec.from_dict([{"name": "a", "kind": "counter"}, {"name": "a", "kind": "indicator"}])


def test_enumerate_needs_finite():
    with pytest.raises(CapabilityError):
        list(mdv_like().enumerate())
    m = MonoidSpec.from_dict([{"name": "h", "kind": "saturating_counter", "cap": 2},
                              {"name": "z", "kind": "finite_set", "universe": ["a", "b"]}])
    assert len(list(m.enumerate())) == m.size() == 12


def test_wide_universe():
    universe = [f"z{i}" for i in range(150)]
    m = MonoidSpec.from_dict([{"name": "z", "kind": "finite_set", "universe": universe}])
    a, b = m.value(z=["z149"]), m.value(z=["z0", "z149"])
    assert m.leq(a, b) and not m.leq(b, a)
    assert m.to_doc(m.add(a, m.value(z=["z75"])))["z"] == ["z75", "z149"]


def test_document_round_trip():
    m = mdv_like()
    assert MonoidSpec.from_dict(m.to_dict()) == m
    v = m.value(dist=1200, stops=3, zones=["H", "233"])
    assert m.value(m.to_doc(v)) == v


# -- properties ------------------------------------------------------------

components = st.one_of(
    st.builds(lambda: {"kind": "counter"}),
    st.integers(0, 6).map(lambda c: {"kind": "saturating_counter", "cap": c}),
    st.integers(1, 5).map(lambda n: {"kind": "finite_set", "universe": [f"u{i}" for i in range(n)]}),
    st.builds(lambda: {"kind": "indicator"}),
)


@st.composite
def spec_and_values(draw, count=3):
    comps = draw(st.lists(components, min_size=1, max_size=4))
    spec = MonoidSpec.from_dict([dict(c, name=f"c{i}") for i, c in enumerate(comps)])
    vals = []
    for _ in range(count):
        v = []
        for c in spec.components:
            if c.kind == "counter":
                v.append(draw(st.integers(0, 10_000)))
            else:
                v.append(draw(st.integers(0, c.domain_size() - 1)))
        vals.append(tuple(v))
    return spec, vals


@settings(max_examples=300)
@given(spec_and_values())
def test_associative_with_identity(sv):
    m, (a, b, c) = sv
    assert m.add(m.add(a, b), c) == m.add(a, m.add(b, c))
    assert m.add(a, m.zero()) == a == m.add(m.zero(), a)


@settings(max_examples=300)
@given(spec_and_values())
def test_positive_and_translation_invariant(sv):
    m, (a, d, x) = sv
    b = m.add(a, d)  # a <= b by positivity
    assert m.leq(m.zero(), a)
    assert m.leq(a, b)
    assert m.leq(m.add(a, x), m.add(b, x))


@settings(max_examples=300)
@given(spec_and_values())
def test_partial_order_axioms(sv):
    m, (a, b, c) = sv
    assert m.leq(a, a)
    if m.leq(a, b) and m.leq(b, a):
        assert a == b
    if m.leq(a, b) and m.leq(b, c):
        assert m.leq(a, c)


@settings(max_examples=200)
@given(spec_and_values())
def test_saturation_never_exceeds_cap(sv):
    m, (a, b, _) = sv
    s = m.add(a, b)
    for c, x in zip(m.components, s):
        if c.kind == "saturating_counter":
            assert x <= c.cap


def test_translation_invariance_bulk():
    m = MonoidSpec.from_dict([
        {"name": "d", "kind": "counter"},
        {"name": "h", "kind": "saturating_counter", "cap": 4},
        {"name": "z", "kind": "finite_set", "universe": ZONES},
        {"name": "x", "kind": "indicator"},
    ])
    rng = random.Random(7)
    for _ in range(100_000):
        a = m.random(rng)
        b = m.add(a, m.random_sparse(rng))
        x = m.random(rng)
        assert m.leq(m.add(a, x), m.add(b, x))


def test_unit_steps_cover():
    m = MonoidSpec.from_dict([{"name": "h", "kind": "saturating_counter", "cap": 2},
                              {"name": "z", "kind": "finite_set", "universe": ["a", "b"]}])
    values = list(m.enumerate())
    # the reflexive-transitive closure of unit steps is exactly the order
    reach = {v: {v} for v in values}
    changed = True
    while changed:
        changed = False
        for v in values:
            for w in list(reach[v]):
                for u in m.unit_steps(w):
                    if u not in reach[v]:
                        reach[v].add(u)
                        changed = True
    for a in values:
        for b in values:
            assert (b in reach[a]) == m.leq(a, b)


def test_batch_columns_match_scalar_add():
    import numpy as np
    m = MonoidSpec.from_dict([
        {"name": "d", "kind": "counter"},
        {"name": "h", "kind": "saturating_counter", "cap": 3},
        {"name": "w", "kind": "finite_set", "universe": [f"u{i}" for i in range(100)]},
        {"name": "x", "kind": "indicator"},
    ])
    gen = np.random.default_rng(1)
    a = m.random_columns(gen, 2000, [50, 0, 0, 0])
    b = m.random_columns(gen, 2000, [50, 0, 0, 0], sparse=True)
    for x, y, s in zip(m.rows(a), m.rows(b), m.rows(m.add_columns(a, b))):
        m.check(s)
        assert m.add(x, y) == s and m.leq(x, s)
