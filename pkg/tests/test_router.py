from dataclasses import replace
from fractions import Fraction

import pytest

from farecfn.router import (
    INF,
    Label,
    Query,
    Router,
    backward_raptor,
    bag_insert,
    in_restricted,
    in_restricted_by_own_anchor,
    overlap_dep_bounds,
    price_filter,
    ptp_filter,
    raptor,
    reconstruct_journey,
)
from farecfn.tickets import Comparator

EIGHT = 8 * 3600

MDV_GOLDENS = [
    ("A", "L", "Z4"), ("A", "G", "Z2"), ("A", "C", "H"), ("H", "L", "L"),
    ("E", "F", "C1"), ("A", "B", "D_H"), ("I", "L", "D_L"), ("J", "M", "Z1"),
    ("E", "D", "Z1"), ("A", "D", "H"),
]


@pytest.fixture(scope="module")
def mdv_router(mdv, mdv_partition):
    return Router(mdv, mdv_partition)


@pytest.mark.parametrize("origin,target,ticket", MDV_GOLDENS)
def test_mdv_cheapest_ticket(mdv_router, origin, target, ticket):
    best = price_filter(mdv_router.mc_raptor(Query(origin, target, EIGHT)).journeys)
    assert best
    cheapest = min(best, key=lambda j: j.price)
    assert cheapest.ticket == ticket


def test_mdv_overlap_zone_used(mdv_router, mdv):
    j = min(mdv_router.mc_raptor(Query("J", "M", EIGHT)).journeys, key=lambda j: j.price)
    assert mdv.monoid.to_doc(j.fare.weight)["zones"] == ["162"]


@pytest.mark.parametrize("variant", ["target_bmrap", "tight_bmrap"])
@pytest.mark.parametrize("origin,target,ticket", MDV_GOLDENS)
def test_mdv_goldens_survive_pruning(mdv_router, variant, origin, target, ticket):
    q = Query(origin, target, EIGHT, variant=variant, ptp=True, fss=True, slack_arr=1800, slack_tr=2)
    best = price_filter(mdv_router.route(q).journeys)
    assert min(best, key=lambda j: j.price).ticket == ticket


def test_same_stop_query(mdv_router):
    res = mdv_router.mc_raptor(Query("A", "A", EIGHT))
    zero = [j for j in res.journeys if not j.legs]
    assert len(zero) == 1 and zero[0].arrival == EIGHT and zero[0].trips == 0
    # state-optimal output may hold more; the price filter keeps only the empty journey
    assert [j.key for j in price_filter(res.journeys)] == [zero[0].key]


def test_mdv_price_fractions(mdv_router):
    j = price_filter(mdv_router.mc_raptor(Query("A", "L", EIGHT)).journeys)[0]
    assert j.price == Fraction(28, 5) and j.trips == 2


# -- figure fixtures ------------------------------------------------------

def test_fig4b_route(fig4b):
    r = Router(fig4b)
    res = r.mc_raptor(Query("v1", "v5", EIGHT))
    assert sorted((j.ticket, j.arrival - EIGHT, j.trips) for j in res.journeys) == \
        [("C", 3, 3), ("E", 3, 3)]
    assert [j.ticket for j in price_filter(res.journeys)] == ["C"]


def test_fig4c_route(fig4c):
    best = price_filter(Router(fig4c).mc_raptor(Query("v1", "v5", EIGHT)).journeys)
    assert [j.ticket for j in best] == ["B"]


def test_fig5_square_mark(fig5):
    q = Query("S", "T", EIGHT, variant="tight_bmrap", slack_arr=1800, slack_tr=1)
    r = Router(fig5)
    res = r.tight_bmrap(q)
    assert res.anchors == [(EIGHT + 1800, 1), (EIGHT + 600, 4)]
    got = sorted((j.ticket, j.arrival - EIGHT, j.trips) for j in price_filter(res.journeys))
    assert got == [("B", 600, 4), ("B", 1800, 3), ("X", 1800, 1)]
    square = [j for j in res.journeys if j.trips == 3]
    assert square
    for j in square:
        assert in_restricted(j.arrival, j.trips, res.anchors, 1800, 1)
        assert not in_restricted_by_own_anchor(j.arrival, j.trips, res.anchors, 1800, 1)


def test_fig5_bounds(fig5):
    q = Query("S", "T", EIGHT, slack_arr=1800, slack_tr=1)
    rr, db, _ = Router(fig5).bounds(q)
    t = fig5.stop_index("T")
    assert db.m == 5
    # bag bound at the target in round k
    assert [db.get(db.m - k, t) - EIGHT for k in range(6)] == [3600, 3600, 3600, 2400, 2400, 2400]


# -- RAPTOR ----------------------------------------------------------------

def test_raptor_rounds_monotone(mdv):
    rr = raptor(mdv, mdv.stop_index("A"), None, EIGHT, 6)
    for k in range(1, len(rr.arrivals)):
        assert all(b <= a for a, b in zip(rr.arrivals[k - 1], rr.arrivals[k]))


def test_raptor_anchors(mdv):
    a, l = mdv.stop_index("A"), mdv.stop_index("L")
    rr = raptor(mdv, a, l, EIGHT)
    arrivals = [x for x, _ in rr.anchors]
    trips = [k for _, k in rr.anchors]
    assert arrivals == sorted(arrivals, reverse=True) and trips == sorted(trips)
    assert rr.target_bound(l, 100) == rr.anchors[-1][0]


def test_raptor_unreachable(fig4b):
    rr = raptor(fig4b, fig4b.stop_index("v5"), fig4b.stop_index("v1"), EIGHT)
    assert rr.anchors == []


def test_backward_matches_forward(mdv):
    a, l = mdv.stop_index("A"), mdv.stop_index("L")
    rr = raptor(mdv, a, l, EIGHT)
    for arr, trips in rr.anchors:
        table, _ = backward_raptor(mdv, l, arr, trips)
        # a journey departing A at EIGHT fits within the budget
        assert table[trips][a] >= EIGHT
        # and nothing later than the arrival bound itself is feasible at the target
        assert table[0][l] == arr


def test_overlap_bounds_shift():
    n = 2
    t1 = [[1.0, 2.0], [3.0, 4.0]]
    t2 = [[0.0, 9.0], [5.0, 1.0], [6.0, 1.0]]
    db = overlap_dep_bounds([(100, 1), (90, 2)], [t1, t2], 0, n)
    assert db.m == 2
    assert db.rows[1] == [5.0, 2.0]
    assert db.rows[2] == [6.0, 4.0]
    assert db.get(-1, 0) == -INF and db.get(7, 0) == 6.0


# -- bags and filters ------------------------------------------------------

def _lab(eta, ti, h, seq=0, fresh=False):
    return Label(eta, 1, ti, h, fresh, None, None, seq)


def test_bag_insert(fig4b):
    g = fig4b.graph
    cmp = Comparator(g, fig4b.fares.partition())
    b, c = g.index["B"], g.index["C"]
    bag = []
    assert bag_insert(bag, _lab(10, b, (1,)), cmp)
    assert not bag_insert(bag, _lab(10, b, (1,), 1), cmp)  # duplicate
    assert not bag_insert(bag, _lab(12, c, (2,), 2), cmp)  # later and pricier
    assert bag_insert(bag, _lab(8, c, (2,), 3), cmp)  # earlier: both stay
    assert len(bag) == 2
    assert bag_insert(bag, _lab(7, b, (0,), 4), cmp)  # dominates both
    assert [l.seq for l in bag] == [4]


def test_fresh_labels_kept_apart(fig4b):
    g = fig4b.graph
    cmp = Comparator(g, fig4b.fares.partition())
    bag = [_lab(10, g.index["A"], (0,), fresh=True)]
    assert bag_insert(bag, _lab(10, g.index["A"], (0,), 1), cmp)
    assert len(bag) == 2


def test_price_filter_examples(mdv_router):
    res = mdv_router.mc_raptor(Query("A", "L", EIGHT))
    kept = price_filter(res.journeys)
    for j in res.journeys:
        assert any(k.arrival <= j.arrival and k.trips <= j.trips and k.price <= j.price for k in kept)
    for a in kept:
        for b in kept:
            if a is not b:
                assert not (a.arrival <= b.arrival and a.trips <= b.trips and a.price <= b.price)


def test_ptp_rule():
    assert ptp_filter(Fraction(2), None)
    assert ptp_filter(Fraction(2), Fraction(3))
    assert not ptp_filter(Fraction(3), Fraction(3))


# -- journeys --------------------------------------------------------------

def test_reconstruction_is_consistent(mdv_router, mdv):
    for o, t, _ in MDV_GOLDENS:
        for j in mdv_router.mc_raptor(Query(o, t, EIGHT)).journeys:
            if not j.legs:
                continue
            assert j.legs[0].from_stop == o and j.legs[-1].to_stop == t
            assert j.legs[-1].arr == j.arrival
            assert sum(l.kind == "ride" for l in j.legs) == j.trips
            for a, b in zip(j.legs, j.legs[1:]):
                assert a.to_stop == b.from_stop and a.arr <= b.dep
            assert j.trace[-1] == j.fare and j.price == mdv.graph.prices[mdv.graph.index[j.ticket]]


def test_reconstruct_rejects_orphan(mdv):
    with pytest.raises(Exception):
        reconstruct_journey(mdv, Label(0, 1, 0, mdv.monoid.zero(), False, None, ("walk", 0, 1, 5), 0))


def test_deterministic(mdv, mdv_partition):
    q = Query("A", "L", EIGHT, ptp=True, fss=True)
    a = Router(mdv, mdv_partition).mc_raptor(q)
    b = Router(mdv, mdv_partition).mc_raptor(q)
    assert [j.to_dict(mdv.monoid) for j in a.journeys] == [j.to_dict(mdv.monoid) for j in b.journeys]
    assert a.stats == b.stats


def test_flags_transparent_on_mdv(mdv_router):
    for o, t, _ in MDV_GOLDENS:
        q = Query(o, t, EIGHT)
        want = {j.key for j in price_filter(mdv_router.mc_raptor(q).journeys)}
        for ptp, fss in ((True, False), (False, True), (True, True)):
            got = mdv_router.mc_raptor(replace(q, ptp=ptp, fss=fss))
            assert {j.key for j in price_filter(got.journeys)} == want


def test_query_validation():
    with pytest.raises(ValueError):
        Query("a", "b", 0, variant="dijkstra")
    with pytest.raises(ValueError):
        Query("a", "b", 0, slack_tr=-1)


def test_unknown_stop(mdv_router):
    with pytest.raises(KeyError):
        mdv_router.mc_raptor(Query("A", "NOPE", EIGHT))
