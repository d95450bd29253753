# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import datetime as dt
import sys
from pathlib import Path

import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.errors import GtfsFeedError, TimetableError, UnknownStopError
from hyptransit.core.gtfs_feed import (
    RawTrip,
    build_timetable,
    canonicalize_routes,
    format_gtfs_time,
    load_gtfs,
    parse_gtfs_time,
    remove_overtaking_trips,
    write_feed,
)
from hyptransit.core.raptor_engine import raptor_query
from hyptransit.core.timetable import neighborhood, validate

TOY_FEED = Path(__file__).resolve().parent / "fixtures" / "toy_feed"


def _stops(*ids):
    return pd.DataFrame({
        "stop_id": list(ids),
        "stop_lat": [47.0 + 0.01 * i for i in range(len(ids))],
        "stop_lon": [8.0 + 0.01 * i for i in range(len(ids))],
    })


def _write(tmp_path, rows, trips=None, stops=("a", "b", "c")):
    frame = pd.DataFrame(rows, columns=["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"])
    if trips is None:
        trips = pd.DataFrame({
            "trip_id": sorted(set(frame["trip_id"])) or ["x"],
            "route_id": "r",
            "service_id": "daily",
        })
    return write_feed(tmp_path / "feed", _stops(*stops), trips, frame)


def test_toy_feed_counts(toy):
    assert toy.describe() == {"stops": 9, "routes": 5, "trips": 35, "footpaths": 1, "stopevents": 98}
    assert toy.stop_ids == ("s0", "s2", "s3", "s5", "s6", "s7", "s8", "s9", "sd")
    assert [len(route) for route in toy.routes] == [3, 3, 3, 2, 3]
    validate(toy)


def test_trip_ids_are_route_major(toy):
    assert toy.trip_index("t1") == 0
    assert toy.trip_index("t6") == 1
    assert toy.trip_index("t31") == 6
    assert toy.trip_index("t2") == 7
    assert list(toy.route_trip_ids(1)) == list(range(7, 14))
    with pytest.raises(TimetableError):
        toy.trip_index("t99")


def test_footpaths_and_neighborhood(toy):
    s3, sd = toy.stop_index("s3"), toy.stop_index("sd")
    assert toy.footpaths.duration(s3, sd) == 2400
    assert toy.footpaths.duration(sd, s3) == 2400
    assert neighborhood(toy, s3) == frozenset({s3, sd})
    assert toy.walks_from(s3)[0] == (s3, 0)
    with pytest.raises(UnknownStopError):
        toy.stop_index("nowhere")


def test_gtfs_time_beyond_midnight():
    assert parse_gtfs_time("25:10:00") == 90600
    assert format_gtfs_time(90600) == "25:10:00"
    with pytest.raises(ValueError):
        parse_gtfs_time("8:61:00")


def test_same_route_id_different_sequences_split():
    trips = [
        RawTrip("x", "r", ("a", "b"), (0, 60), (0, 60)),
        RawTrip("y", "r", ("a", "c"), (10, 70), (10, 70)),
    ]
    assert len(canonicalize_routes(trips)) == 2


def test_identical_sequences_merge_across_route_ids():
    trips = [
        RawTrip("y", "r2", ("a", "b"), (100, 160), (100, 160)),
        RawTrip("x", "r1", ("a", "b"), (0, 60), (0, 60)),
    ]
    routes = canonicalize_routes(trips)
    assert len(routes) == 1
    assert [trip.gtfs_id for trip in routes[0].trips] == ["x", "y"]


def test_overtaking_trip_is_dropped():
    trips = [
        RawTrip("slow", "r", ("a", "b"), (0, 600), (0, 600)),
        RawTrip("fast", "r", ("a", "b"), (60, 300), (60, 300)),
    ]
    warnings = []
    routes = remove_overtaking_trips(canonicalize_routes(trips), warnings)
    assert [trip.gtfs_id for trip in routes[0].trips] == ["slow"]
    assert warnings and "overtaking" in warnings[0]


def test_empty_stop_times_is_an_error(tmp_path):
    feed = _write(tmp_path, [])
    with pytest.raises(GtfsFeedError, match="no stop events"):
        load_gtfs(feed)


def test_single_event_trip_is_dropped_with_warning(tmp_path):
    feed = _write(tmp_path, [
        ("x", "08:00:00", "08:00:00", "a", 1),
        ("x", "08:05:00", "08:05:00", "b", 2),
        ("y", "08:00:00", "08:00:00", "c", 1),
    ])
    raw = load_gtfs(feed)
    assert [trip.gtfs_id for trip in raw.trips] == ["x"]
    assert any("trip=y" in warning for warning in raw.warnings)
    tt, stats = build_timetable(raw)
    assert stats["dropped_trips"] == 1
    assert stats["dropped_stops"] == 1
    assert tt.n_stops == 2


def test_malformed_time_reports_file_and_line(tmp_path):
    feed = _write(tmp_path, [
        ("x", "08:00:00", "08:00:00", "a", 1),
        ("x", "8h05", "8h05", "b", 2),
    ])
    with pytest.raises(GtfsFeedError) as info:
        load_gtfs(feed)
    assert info.value.file == "stop_times.txt"
    assert info.value.line == 3


def test_missing_required_file(tmp_path):
    feed = _write(tmp_path, [("x", "08:00:00", "08:00:00", "a", 1), ("x", "08:05:00", "08:05:00", "b", 2)])
    (feed / "trips.txt").unlink()
    with pytest.raises(GtfsFeedError, match="trips.txt"):
        load_gtfs(feed)


def test_calendar_filters_by_weekday(tmp_path):
    trips = pd.DataFrame({"trip_id": ["wk", "we"], "route_id": "r", "service_id": ["weekday", "weekend"]})
    feed = _write(tmp_path, [
        ("wk", "08:00:00", "08:00:00", "a", 1),
        ("wk", "08:05:00", "08:05:00", "b", 2),
        ("we", "09:00:00", "09:00:00", "a", 1),
        ("we", "09:05:00", "09:05:00", "b", 2),
    ], trips=trips)
    days = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
    calendar = pd.DataFrame([
        {"service_id": "weekday", **{d: int(i < 5) for i, d in enumerate(days)},
         "start_date": "20250101", "end_date": "20251231"},
        {"service_id": "weekend", **{d: int(i >= 5) for i, d in enumerate(days)},
         "start_date": "20250101", "end_date": "20251231"},
    ])
    calendar.to_csv(feed / "calendar.txt", index=False)

    monday = load_gtfs(feed, dt.date(2025, 3, 3))
    saturday = load_gtfs(feed, dt.date(2025, 3, 8))
    assert [trip.gtfs_id for trip in monday.trips] == ["wk"]
    assert [trip.gtfs_id for trip in saturday.trips] == ["we"]
    assert len(load_gtfs(feed).trips) == 2


def test_walk_chain_through_unserved_stop(tmp_path):
    frame = pd.DataFrame([
        ("t1", "08:00:00", "08:00:00", "A", 1),
        ("t1", "08:10:00", "08:10:00", "B", 2),
        ("t2", "08:30:00", "08:30:00", "C", 1),
        ("t2", "08:40:00", "08:40:00", "D", 2),
    ], columns=["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"])
    trips = pd.DataFrame({"trip_id": ["t1", "t2"], "route_id": "r", "service_id": "daily"})
    transfers = pd.DataFrame({
        "from_stop_id": ["B", "X"],
        "to_stop_id": ["X", "C"],
        "transfer_type": [2, 2],
        "min_transfer_time": [60, 60],
    })
    feed = write_feed(tmp_path / "feed", _stops("A", "B", "X", "C", "D"), trips, frame, transfers)

    tt, stats = build_timetable(load_gtfs(feed))
    validate(tt)
    assert tt.stop_ids == ("A", "B", "C", "D")
    assert stats["dropped_stops"] == 1
    assert stats["footpath_source"] == "transfers.txt"
    assert tt.footpaths.duration(tt.stop_index("B"), tt.stop_index("C")) == 120
    result = raptor_query(tt, tt.stop_index("A"), tt.stop_index("D"), parse_gtfs_time("08:00:00"))
    assert result.pareto == ((parse_gtfs_time("08:40:00"), 1),)


def test_zero_duration_hop_is_kept(tmp_path):
    feed = _write(tmp_path, [
        ("x", "08:00:00", "08:00:00", "a", 1),
        ("x", "08:00:00", "08:00:00", "b", 2),
        ("x", "08:05:00", "08:05:00", "c", 3),
    ])
    raw = load_gtfs(feed)
    assert [trip.gtfs_id for trip in raw.trips] == ["x"]
    assert not any("decreasing_times" in warning for warning in raw.warnings)
    tt, _ = build_timetable(raw)
    validate(tt)
    assert tt.n_stops == 3


def test_decreasing_hop_drops_the_trip(tmp_path):
    feed = _write(tmp_path, [
        ("x", "08:00:00", "08:00:00", "a", 1),
        ("x", "07:59:00", "07:59:00", "b", 2),
        ("y", "08:00:00", "08:00:00", "a", 1),
        ("y", "08:05:00", "08:05:00", "b", 2),
    ])
    raw = load_gtfs(feed)
    assert [trip.gtfs_id for trip in raw.trips] == ["y"]
    assert any("trip=x" in warning and "decreasing_times" in warning for warning in raw.warnings)


def test_timetable_carries_no_change_times(toy):
    assert not hasattr(toy, "change_times")
