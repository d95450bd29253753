# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core import bench
from hyptransit.core.bench import gain_percent, run_bench, run_verify, sample_queries
from hyptransit.core.pareto import QueryResult, departure_times
from hyptransit.core.transfer_set import preprocess_transfers


@pytest.mark.parametrize("base,variant,expected", [(200, 150, 25.0), (100, 120, -20.0), (0, 5, 0.0), (3, 3, 0.0)])
def test_gain_percent(base, variant, expected):
    assert gain_percent(base, variant) == expected


def test_sample_queries_are_reproducible(toy):
    first = sample_queries(toy, 25, seed=3)
    assert first == sample_queries(toy, 25, seed=3)
    assert first != sample_queries(toy, 25, seed=4)
    for origin, target, departure in first:
        assert origin != target
        times = departure_times(toy, origin)
        assert departure in times if times else departure == 0


def test_verify_passes_on_toy(toy, toy_transfers):
    report = run_verify(toy, num_queries=30, seed=7, transfers=toy_transfers, partitions="2", max_transfers=4)
    assert report.ok
    assert report.passed == report.queries == 30
    assert report.reproducer is None
    assert report.work["hyptbtr_segments"] <= report.work["tbtr_segments"]
    assert report.to_dict()["ok"] is True


@pytest.mark.parametrize("partitions", ["2", "2x2"])
def test_verify_passes_on_synthetic(synth_instances, partitions):
    tt, transfers = synth_instances[2]
    report = run_verify(tt, num_queries=25, seed=1, transfers=transfers, partitions=partitions, max_transfers=3)
    assert report.ok, report.failures


def test_verify_accepts_reduced_transfers(synth_instances):
    tt, _ = synth_instances[1]
    reduced, _ = preprocess_transfers(tt, "reduced")
    report = run_verify(tt, num_queries=25, seed=3, transfers=reduced, partitions="2", max_transfers=3)
    assert report.ok, report.failures


def test_verify_writes_reproducer_on_mismatch(toy, toy_transfers, tmp_path, monkeypatch):
    monkeypatch.setattr(bench, "raptor_query", lambda *args, **kwargs: QueryResult(pareto=()))
    path = tmp_path / "repro" / "case.json"
    report = run_verify(toy, num_queries=20, seed=7, transfers=toy_transfers, reproducer_path=path)
    assert not report.ok
    assert all(failure["engines"] == ["raptor"] for failure in report.failures)
    written = json.loads(path.read_text(encoding="utf-8"))
    assert written["query"]["origin"] in toy.stop_ids
    assert written["results"]["raptor"] == []
    assert written["results"]["ted"]
    assert set(written["slice"]) == {"stops", "trips"}


def test_bench_report_columns(toy, toy_transfers, tmp_path):
    report = run_bench(toy, num_queries=10, seed=2, transfers=toy_transfers, max_transfers=4)
    engines = report.engines
    assert isinstance(engines, pd.DataFrame)
    assert engines["engine"].tolist() == ["raptor", "tbtr", "hyptbtr", "hypraptor"]
    assert engines["partitions"].tolist() == ["", "", "2", "2"]
    hyp = engines[engines["engine"].isin(["hyptbtr", "hypraptor"])]
    assert hyp["gain_percent"].notna().all()
    assert hyp["work_gain_percent"].notna().all()
    assert engines.loc[engines["engine"] == "raptor", "gain_percent"].isna().all()

    row = report.partitions.iloc[0]
    assert row["partitions"] == "2"
    assert row["kind"] == "standard"
    assert {"fillin_tbtr_size", "fillin_raptor_size", "pqueries", "cutstops_percent"} <= set(report.partitions.columns)

    written = report.save(tmp_path / "out")
    assert [path.name for path in written] == ["engines.csv", "partitions.csv", "report.json"]
    assert json.loads(written[2].read_text(encoding="utf-8"))["engines"][0]["engine"] == "raptor"
    assert report.to_csv().startswith("engine,partitions,queries")


def test_single_engine_has_no_gain_columns(toy):
    report = run_bench(toy, engines=("raptor",), num_queries=5, max_transfers=4)
    assert report.engines["engine"].tolist() == ["raptor"]
    assert "gain_percent" not in report.engines.columns
    assert report.partitions["fillin_raptor_size"].iloc[0] >= 0


def test_nested_rows_compare_with_flat_workload(synth_instances):
    tt, transfers = synth_instances[2]
    report = run_bench(tt, engines=("tbtr",), partitions=("4", "2x2"), num_queries=3,
                       transfers=transfers, max_transfers=3)
    nested = report.partitions[report.partitions["kind"] == "nested"].iloc[0]
    assert nested["pqueries_standard"] == report.partitions.iloc[0]["pqueries"]


def test_unknown_engine_rejected(toy):
    with pytest.raises(ValueError, match="unknown engines"):
        run_bench(toy, engines=("dijkstra",), num_queries=1)
