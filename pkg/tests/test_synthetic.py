from farecfn.document import validate_cfn
from farecfn.router import Query, Router, price_filter, raptor
from farecfn.synthetic import CityParams, od_queries, synthetic_city, zonal_fare_doc


def test_city_scale(city):
    assert len(city.ftt.stops) == 500
    assert 250 <= len(city.ftt.routes) <= 350
    lines = {t.route_hint for r in city.timetable.routes for t in r.trips}
    assert len(lines) == 300


def test_city_is_deterministic(city):
    again = synthetic_city(CityParams(seed=0))
    assert again.fare_doc == city.fare_doc
    assert [r.trip_ids for r in again.ftt.routes] == [r.trip_ids for r in city.ftt.routes]
    other = synthetic_city(CityParams(seed=1))
    assert [r.trip_ids for r in other.ftt.routes] != [r.trip_ids for r in city.ftt.routes]


def test_zonal_fares_valid_and_fully_comparable(city):
    assert validate_cfn(zonal_fare_doc(["1", "2", "3"])).valid
    part = city.ftt.fares.partition()
    assert set(part.full) == set(city.ftt.graph.ids)


def test_od_queries_reachable(city):
    qs, dropped = od_queries(city.ftt, 20, seed=4)
    assert len(qs) == 20 and dropped >= 0
    for q in qs:
        assert 7 * 3600 <= q.departure <= 8 * 3600 and q.origin != q.target
        o, t = city.ftt.stop_index(q.origin), city.ftt.stop_index(q.target)
        assert raptor(city.ftt, o, t, q.departure).anchors
    assert od_queries(city.ftt, 20, seed=4)[0] == qs


def test_city_query_prices_rise_with_zones(city):
    qs, _ = od_queries(city.ftt, 10, seed=2)
    router = Router(city.ftt)
    for q in qs:
        best = price_filter(router.mc_raptor(q).journeys)
        assert best
        # faster journeys never cost less than the cheapest one
        cheapest = min(j.price for j in best)
        assert all(j.price >= cheapest for j in best)


def test_pruned_variants_keep_anchors(city):
    qs, _ = od_queries(city.ftt, 5, seed=8)
    router = Router(city.ftt)
    for q in qs:
        res = router.tight_bmrap(Query(q.origin, q.target, q.departure, variant="tight_bmrap",
                                       ptp=True, fss=True, slack_arr=900, slack_tr=1))
        have = {(j.arrival, j.trips) for j in res.journeys}
        assert set(res.anchors) <= have
