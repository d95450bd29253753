# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.timetable import FootpathGraph, Timetable
from hyptransit.core.transfer_set import (
    STAGES,
    TransferSet,
    generate_transfers,
    preprocess_transfers,
    reduce_transfers,
    remove_uturns,
)


def _transfer(tt, trip, i, other, j):
    return (tt.trip_index(trip), i, tt.trip_index(other), j)


@pytest.mark.parametrize("trip,i,other,j", [
    ("t1", 1, "t8", 0),
    ("t2", 2, "t14", 0),
    ("t14", 1, "t20", 0),
    ("t8", 2, "t20", 0),
])
def test_toy_transfers_present(toy, toy_transfers, trip, i, other, j):
    assert toy_transfers.contains(*_transfer(toy, trip, i, other, j))


def test_transfers_target_earliest_trip_only(toy, toy_transfers):
    # t1 reaches s2 at 08:10; r3 departs s2 every 10 minutes from 08:00.
    assert not toy_transfers.contains(*_transfer(toy, "t1", 1, "t13", 0))
    assert not toy_transfers.contains(*_transfer(toy, "t1", 1, "t3", 0))


def test_no_transfer_onto_same_trip(toy, toy_transfers):
    for trip in range(toy.n_trips):
        assert all(other != trip for _, other, _ in toy_transfers.rows(trip))


def test_rows_sorted_and_between(toy, toy_transfers):
    t1 = toy.trip_index("t1")
    rows = toy_transfers.rows(t1)
    assert rows == sorted(rows)
    assert toy_transfers.between(t1, 1, 1) == [row for row in rows if row[0] == 1]
    assert toy_transfers.between(t1, 2, 2) == []


def test_stage_sizes_never_grow(synth_instances):
    tt, _ = synth_instances[1]
    generated = generate_transfers(tt)
    uturn_free = remove_uturns(tt, generated)
    reduced = reduce_transfers(tt, uturn_free)
    assert len(generated) >= len(uturn_free) >= len(reduced)
    assert (generated.stage, uturn_free.stage, reduced.stage) == STAGES


def test_preprocess_reports_each_stage(toy):
    transfers, stats = preprocess_transfers(toy, "reduced")
    assert stats["stage"] == "reduced"
    assert set(stats["T-size"]) == set(STAGES)
    assert stats["T-size"]["reduced"] == len(transfers)
    with pytest.raises(ValueError):
        preprocess_transfers(toy, "everything")


def test_parallel_generation_matches_serial(synth_instances):
    tt, _ = synth_instances[0]
    serial = generate_transfers(tt)
    assert generate_transfers(tt, workers=2).equals(serial)
    assert reduce_transfers(tt, serial, workers=2).equals(reduce_transfers(tt, serial))


def test_from_rows_round_trip():
    transfers = TransferSet.from_rows([[(1, 1, 0)], [], [(2, 0, 1), (1, 1, 0)]])
    assert len(transfers) == 3
    assert transfers.n_trips == 3
    assert transfers.rows(2) == [(1, 1, 0), (2, 0, 1)]
    assert transfers.contains(0, 1, 1, 0)
    assert not transfers.contains(1, 1, 1, 0)


def _network(stops, routes, footpaths=()):
    """routes: [(stop names, [(trip id, times)])], arrivals equal departures."""
    index = {name: k for k, name in enumerate(stops)}
    return Timetable.assemble(
        stops,
        np.zeros((len(stops), 2)),
        [tuple(index[s] for s in names) for names, _ in routes],
        [[(trip, times, times) for trip, times in trips] for _, trips in routes],
        FootpathGraph.from_pairs(len(stops), [(index[a], index[b], d) for a, b, d in footpaths]),
    )


def test_uturn_back_to_previous_stop_is_removed():
    # t reaches s1 via s3; tp leaves s2 (a walk from s1) back through s3.
    tt = _network(
        ["x", "s3", "s1", "s2", "y"],
        [
            (("x", "s3", "s1"), [("t", [0, 600, 1200])]),
            (("s2", "s3", "y"), [("tp", [1500, 2100, 2700])]),
        ],
        footpaths=[("s1", "s2", 60)],
    )
    generated = generate_transfers(tt)
    assert generated.rows(0) == [(1, 1, 1), (2, 1, 0)]
    assert remove_uturns(tt, generated).rows(0) == [(1, 1, 1)]


def test_walk_transfer_without_uturn_is_retained():
    tt = _network(
        ["x", "s3", "s1", "s2", "s4", "y"],
        [
            (("x", "s3", "s1"), [("t", [0, 600, 1200])]),
            (("s2", "s4", "y"), [("tp", [1500, 2100, 2700])]),
        ],
        footpaths=[("s1", "s2", 60)],
    )
    generated = generate_transfers(tt)
    assert generated.rows(0) == [(2, 1, 0)]
    assert remove_uturns(tt, generated).rows(0) == [(2, 1, 0)]


def test_reduction_drops_slower_parallel_trip():
    tt = _network(
        ["a", "b", "c", "d", "e"],
        [
            (("a", "b", "c", "d"), [("fast", [0, 600, 1200, 1800])]),
            (("b", "c", "d"), [("slow", [900, 1800, 2700])]),
            (("b", "e"), [("feeder", [900, 1500])]),
        ],
    )
    fast, slow, feeder = tt.trip_index("fast"), tt.trip_index("slow"), tt.trip_index("feeder")
    uturn_free = remove_uturns(tt, generate_transfers(tt))
    assert uturn_free.rows(fast) == [(1, slow, 0), (1, feeder, 0), (2, slow, 1)]
    reduced = reduce_transfers(tt, uturn_free)
    assert reduced.rows(fast) == [(1, feeder, 0)]
    assert not reduced.contains(fast, 1, slow, 0)
    assert not reduced.contains(fast, 2, slow, 1)
