import csv
import io
import shutil

import pytest
import yaml

from farecfn.cli import main, parse_clock, parse_duration
from farecfn.harness import Algo, run_bench, summarize
from farecfn.router import Query, Router, price_filter
from farecfn.synthetic import od_queries


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parsers():
    assert parse_clock("08:05") == 8 * 3600 + 300
    assert parse_clock("8:00:30") == 8 * 3600 + 30
    assert parse_clock("120") == 120
    assert parse_duration("15m") == 900 and parse_duration("1h") == 3600 and parse_duration("30") == 30


@pytest.mark.parametrize("name", ["mdv", "fig4b", "fig4c", "fig5", "fig6"])
def test_validate_fixtures(capsys, name):
    code, out, _ = run(capsys, "validate", name)
    assert code == 0 and "valid" in out


def test_validate_structured(capsys):
    code, out, _ = run(capsys, "validate", "mdv", "--format", "structured")
    doc = yaml.safe_load(out)
    assert code == 0
    assert isinstance(doc, (dict, list))


def test_validate_cyclic_doc_exits_1(capsys, tmp_path, data_dir):
    doc = yaml.safe_load((data_dir / "fig6" / "fare.yaml").read_text())
    doc["edges"].append({"from": "t3", "to": "t1", "guard": "(= event s1)"})
    path = tmp_path / "cyclic.yaml"
    path.write_text(yaml.safe_dump(doc))
    code, out, _ = run(capsys, "validate", str(path))
    assert code == 1 and "cycle" in out


def test_bad_timetable_exits_1(capsys, tmp_path, data_dir):
    shutil.copytree(data_dir / "mdv", tmp_path / "d")
    (tmp_path / "d" / "trips.csv").unlink()
    code, _, _ = run(capsys, "validate", str(tmp_path / "d"))
    assert code == 1


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "validate", "/no/such/path")[0] == 2
    assert run(capsys, "query", "mdv", "A", "NOPE")[0] == 2
    assert run(capsys, "query", "mdv", "A", "L", "--time", "noon")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "bench")[0] == 2


def test_capability_error_exits_3(capsys):
    assert run(capsys, "partition", "mdv", "--check", "exhaustive")[0] == 3


def test_partition_fig4b(capsys):
    code, out, _ = run(capsys, "partition", "fig4b", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO("".join(l + "\n" for l in out.splitlines()
                                                   if not l.startswith("#")))))
    assert code == 0
    cls = {r["ticket"]: r["class"] for r in rows}
    assert cls == {"A": "partial", "B": "full", "C": "full", "D": "full", "E": "full"}


def test_partition_witness(capsys):
    code, out, _ = run(capsys, "partition", "fig4c", "--witness", "--format", "structured")
    doc = yaml.safe_load(out)
    assert code == 0
    text = yaml.safe_dump(doc)
    assert "h_bar=4" in text or "h_bar=(4)" in text or "4" in text


def test_query_text(capsys):
    code, out, _ = run(capsys, "query", "mdv", "A", "L", "--time", "08:00")
    assert code == 0
    assert "Z4 5.60" in out and "08:44:00" in out


def test_query_is_byte_identical(capsys):
    args = ("query", "mdv", "A", "L", "--variant", "tight_bmrap", "--slack-arr", "30m",
            "--slack-tr", "1", "--ptp", "--fss", "--format", "structured")
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first == second and first[0] == 0


def test_query_formats_agree(capsys):
    _, s, _ = run(capsys, "query", "mdv", "E", "F", "--format", "structured")
    _, c, _ = run(capsys, "query", "mdv", "E", "F", "--format", "csv")
    doc = yaml.safe_load(s)
    rows = list(csv.DictReader(io.StringIO(c)))
    assert [j["ticket"] for j in doc["journeys"]] == [r["ticket"] for r in rows] == ["C1"]


def test_query_all_shows_state_optimal(capsys):
    _, filtered, _ = run(capsys, "query", "mdv", "A", "A", "--format", "structured")
    _, full, _ = run(capsys, "query", "mdv", "A", "A", "--all", "--format", "structured")
    assert len(yaml.safe_load(filtered)["journeys"]) == 1
    assert len(yaml.safe_load(full)["journeys"]) == 2


def _bench(capsys, *extra):
    code, out, _ = run(capsys, "bench", "mdv", "--no-timing", "--format", "structured", *extra)
    assert code == 0
    return yaml.safe_load(out)


def test_bench_single_pair_has_zero_sd(capsys):
    doc = _bench(capsys, "--pairs", "1", "--algo", "mcraptor")
    row, = doc["rows"]
    assert row["n"] == 1
    assert all(row[k] == 0 for k in row if k.endswith("_sd"))


def test_bench_matches_direct_calls(capsys, mdv, mdv_partition):
    doc = _bench(capsys, "--pairs", "5", "--seed", "3", "--records",
                 "--algo", "mcraptor+ptp", "--algo", "tight_bmrap+ptp+fss@900/1")
    queries, _ = od_queries(mdv, 5, 3, max_rounds=25)
    router = Router(mdv, mdv_partition)
    by_algo = {}
    for rec in doc["records"]:
        by_algo.setdefault(rec["algorithm"], []).append(rec)
    for label, recs in by_algo.items():
        algo = Algo.parse(label)
        for q, rec in zip(queries, recs):
            res = router.route(algo.apply(q))
            assert (rec["origin"], rec["target"]) == (q.origin, q.target)
            assert rec["scans"] == res.stats.scans
            assert rec["price_optimal"] == len(price_filter(res.journeys))


def test_bench_is_deterministic(capsys):
    a = _bench(capsys, "--pairs", "4", "--seed", "9")
    b = _bench(capsys, "--pairs", "4", "--seed", "9")
    assert a == b
    assert [r["algorithm"] for r in a["rows"]][0] == "mcraptor"
    assert a["pairs"] == 4 and a["od_seed"] == 9


def test_bench_workers_agree(capsys):
    a = _bench(capsys, "--pairs", "4", "--algo", "tight_bmrap+ptp+fss@0/0")
    b = _bench(capsys, "--pairs", "4", "--algo", "tight_bmrap+ptp+fss@0/0", "--workers", "2")
    assert a == b


def test_bad_algo_is_usage_error(capsys):
    assert run(capsys, "bench", "mdv", "--algo", "dijkstra")[0] == 2


def test_summarize_population_sd(mdv, mdv_partition):
    queries, _ = od_queries(mdv, 3, 0)
    algo = Algo.parse("mcraptor")
    recs = run_bench(mdv, queries, [algo], partition=mdv_partition)
    row, = summarize(recs, [algo])
    scans = [r.scans for r in recs]
    mean = sum(scans) / 3
    assert row["scans_avg"] == pytest.approx(mean)
    assert row["scans_sd"] == pytest.approx((sum((s - mean) ** 2 for s in scans) / 3) ** 0.5)


def test_oracle_corpus_small(capsys, tmp_path):
    code, out, _ = run(capsys, "oracle-corpus", "--instances", "8", "--format", "csv",
                       "--write", str(tmp_path / "corpus"))
    assert code == 0
    assert "pareto" in out and ",FAIL" not in out
    assert len(list((tmp_path / "corpus").iterdir())) == 8


def test_algo_labels():
    assert Algo.parse("mcraptor+fss+ptp").label == "mcraptor+ptp+fss"
    assert Algo.parse("tight_bmrap+ptp@900/1").label == "tight_bmrap+ptp@900/1"
    q = Algo.parse("target_bmrap@60/2").apply(Query("a", "b", 0))
    assert (q.variant, q.slack_arr, q.slack_tr) == ("target_bmrap", 60, 2)
