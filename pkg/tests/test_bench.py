import csv
import io
import json

import pytest

from fplan import bench as B
from fplan.pipeline import PipelineConfig


def replay_cfg(cassette_dir, name):
    return PipelineConfig(cassette_mode="replay", cassette_path=str(cassette_dir / f"{name}.ndjson"))


@pytest.fixture(scope="module")
def bw_run(cassette_dir):
    return B.run_benchmark("blocksworld", "first:20", replay_cfg(cassette_dir, "bench_blocksworld"))


def test_all_correct_slice_is_fully_optimal(bw_run):
    a = bw_run.aggregates
    assert a["queries"] == 20
    assert a["optimal_rate"] == 1.0 and a["success_rate"] == 1.0
    assert [r.query_id for r in bw_run.records] == sorted(r.query_id for r in bw_run.records)
    assert all(r.value == r.oracle for r in bw_run.records)


def test_aggregates_recompute(bw_run):
    recs = bw_run.records
    assert B.aggregate(recs) == bw_run.aggregates
    a = bw_run.aggregates
    assert a["optimal"] == sum(r.optimal for r in recs)
    assert a["optimal_rate"] <= a["success_rate"]
    assert a["prompt_tokens"] == sum(r.prompt_tokens for r in recs)


def test_concurrency_invariance(bw_run, cassette_dir):
    par = B.run_benchmark("blocksworld", "first:20", replay_cfg(cassette_dir, "bench_blocksworld"), concurrency=4)
    for k in ("optimal_rate", "success_rate", "status_counts"):
        assert par.aggregates[k] == bw_run.aggregates[k]
    assert [(r.query_id, r.status, r.value) for r in par.records] == [(r.query_id, r.status, r.value) for r in bw_run.records]


def test_mixed_slice(cassette_dir):
    run = B.run_benchmark("blocksworld", "first:10", replay_cfg(cassette_dir, "bench_mixed"), concurrency=3)
    a = run.aggregates
    assert a["queries"] == 10
    assert a["status_counts"] == {"budget_exhausted": 1, "plan": 9}
    assert a["success_rate"] == pytest.approx(0.9)
    failed = [r for r in run.records if not r.valid]
    assert [r.query_id for r in failed] == ["bw-002"]


def test_missing_entries_listed(cassette_dir):
    with pytest.raises(B.MissingCassetteEntries) as err:
        B.run_benchmark("coffee", "first:3", replay_cfg(cassette_dir, "bench_blocksworld"))
    assert len(err.value.misses) == 3
    assert all(len(fp) == 64 for _, fp in err.value.misses)


def test_empty_slice(cassette_dir):
    with pytest.raises(B.EmptySlice):
        B.run_benchmark("blocksworld", "id:", replay_cfg(cassette_dir, "bench_blocksworld"))
    with pytest.raises(ValueError):
        B.run_benchmark("blocksworld", "first:2", concurrency=0)


def test_zero_plans_rates_are_zero():
    rec = B.QueryRecord("q", "t", "budget_exhausted", False, False, None, 3, None, 5, {}, 0, 0)
    a = B.aggregate([rec])
    assert a["optimal_rate"] == 0.0 and a["success_rate"] == 0.0
    assert B.aggregate([])["optimal_rate"] == 0.0


def test_cost_from_price_table():
    rec = B.QueryRecord("q", "t", "plan", True, True, 1, 1, None, 1, {}, 2000, 500)
    a = B.aggregate([rec], {"m": {"prompt": 0.01, "completion": 0.03}}, "m")
    assert a["cost"] == pytest.approx(0.02 + 0.015)
    assert "cost" not in B.aggregate([rec], {}, "m")


def test_reports(bw_run, tmp_path):
    first = B.report(bw_run, tmp_path / "a")
    second = B.report(bw_run, tmp_path / "b")
    assert [p.name for p in first] == ["bench_blocksworld.json", "bench_blocksworld.csv", "bench_blocksworld.txt"]
    for p, q in zip(first, second):
        assert p.read_bytes() == q.read_bytes()
    rows = list(csv.DictReader(io.StringIO(first[1].read_text())))
    assert tuple(rows[0].keys()) == B.CSV_COLUMNS
    assert len(rows) == 20
    data = json.loads(first[0].read_text())
    assert set(data["queries"][0]) == set(B.CSV_COLUMNS)
    assert data["aggregates"]["optimal_rate"] == 1.0
    assert "optimal rate  1.000" in first[2].read_text()
    with pytest.raises(ValueError):
        B.report(bw_run, tmp_path, ["xml"])


def test_stage_columns():
    assert B.STAGE_COLUMNS == ("definer", "formulator", "solver", "formatter", "codegen", "assess")
    for s in B.STAGE_COLUMNS:
        assert f"{s}_seconds" in B.CSV_COLUMNS
