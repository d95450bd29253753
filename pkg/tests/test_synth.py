# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.gtfs_feed import build_timetable, load_gtfs
from hyptransit.core.synth import substream, synthesize_feed, write_toy_feed

FEED_FILES = ("stops.txt", "trips.txt", "stop_times.txt", "transfers.txt")


def test_same_parameters_give_identical_files(tmp_path):
    first = synthesize_feed(tmp_path / "a", 20, 5, 4, 0.2, seed=42)
    second = synthesize_feed(tmp_path / "b", 20, 5, 4, 0.2, seed=42)
    for name in FEED_FILES:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_different_seed_changes_feed(tmp_path):
    first = synthesize_feed(tmp_path / "a", 20, 5, 4, 0.2, seed=1)
    second = synthesize_feed(tmp_path / "b", 20, 5, 4, 0.2, seed=2)
    assert (first / "stop_times.txt").read_bytes() != (second / "stop_times.txt").read_bytes()


def test_synthetic_feed_loads(tmp_path):
    feed = synthesize_feed(tmp_path, stops=25, routes=6, trips_per_route=5, footpath_density=0.3, seed=8)
    tt, stats = build_timetable(load_gtfs(feed), walk_threshold_s=1)
    assert 0 < tt.n_trips <= 30
    assert 1 <= tt.n_routes <= 6
    assert stats["footpath_source"] == "transfers.txt"


def test_substreams_are_independent():
    assert substream(7, "queries").integers(1 << 30) == substream(7, "queries").integers(1 << 30)
    assert substream(7, "queries").integers(1 << 30) != substream(7, "partitioner").integers(1 << 30)


@pytest.mark.parametrize("kwargs", [{"stops": 1}, {"routes": 0}, {"footpath_density": 1.5}])
def test_invalid_parameters(tmp_path, kwargs):
    with pytest.raises(ValueError):
        synthesize_feed(tmp_path, **kwargs)


def test_toy_feed_writer_matches_fixture(tmp_path, toy):
    feed = write_toy_feed(tmp_path / "toy")
    tt, _ = build_timetable(load_gtfs(feed))
    assert tt.describe() == toy.describe()
    assert [trip.gtfs_id for trip in tt.trips] == [trip.gtfs_id for trip in toy.trips]
