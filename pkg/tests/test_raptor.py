# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.bench import sample_queries
from hyptransit.core.pareto import SearchStats, departure_times
from hyptransit.core.raptor_engine import otm_rraptor, raptor_query, rraptor
from hyptransit.core.te_oracle import build_te_graph, oracle_pareto

EIGHT_AM = 8 * 3600


def _trip_names(tt, journey):
    return tuple(tt.trips[leg.trip].gtfs_id for leg in journey.legs)


def test_toy_query_matches_expected_front(toy):
    s0, sd = toy.stop_index("s0"), toy.stop_index("sd")
    result = raptor_query(toy, s0, sd, EIGHT_AM, max_transfers=4)
    assert result.pareto == ((32400, 0), (31800, 2))


def test_routes_boarded_per_round(toy):
    stats = SearchStats()
    raptor_query(toy, toy.stop_index("s0"), toy.stop_index("sd"), EIGHT_AM, 4, stats=stats)
    assert stats.round_boardings[:3] == [[0, 1], [2, 3], [4]]
    assert stats.runs == 1
    assert stats.routes_scanned > 0


def test_journeys_cover_tied_paths(toy):
    s0, sd = toy.stop_index("s0"), toy.stop_index("sd")
    result = raptor_query(toy, s0, sd, EIGHT_AM, 4, record_journeys=True)
    names = {_trip_names(toy, journey) for journey in result.journeys}
    assert names == {("t1",), ("t1", "t8", "t20"), ("t2", "t14", "t20")}
    direct = [j for j in result.journeys if len(j.legs) == 1][0]
    assert direct.arrival == 32400
    assert direct.transfers == 0
    assert direct.describe(toy)[0] == {
        "trip": "t1", "board": "s0", "departure": EIGHT_AM, "alight": "s3", "arrival": EIGHT_AM + 1200,
    }


def test_unreachable_and_same_stop(toy):
    s0, sd = toy.stop_index("s0"), toy.stop_index("sd")
    assert raptor_query(toy, sd, s0, EIGHT_AM).pareto == ()
    assert raptor_query(toy, s0, s0, EIGHT_AM).pareto == ((EIGHT_AM, 0),)


def test_negative_budget_rejected(toy):
    with pytest.raises(ValueError):
        raptor_query(toy, 0, 1, EIGHT_AM, max_transfers=-1)


def test_route_filter_restricts_boardings(toy):
    s0, sd = toy.stop_index("s0"), toy.stop_index("sd")
    flags = np.zeros(toy.n_routes, dtype=bool)
    flags[0] = True
    assert raptor_query(toy, s0, sd, EIGHT_AM, route_filter=flags).pareto == ((32400, 0),)


def test_profile_rows_equal_single_departure_queries(toy):
    s0 = toy.stop_index("s0")
    targets = [toy.stop_index(name) for name in ("s6", "s9", "sd")]
    profile = otm_rraptor(toy, s0, targets, max_transfers=4)
    tlist = departure_times(toy, s0)
    for target in targets:
        assert [when for when, _ in profile[target]] == tlist
        for when, pareto in profile[target]:
            assert pareto == raptor_query(toy, s0, target, when, 4).pareto


def test_pruning_does_not_change_profiles(synth_instances):
    for tt, _ in synth_instances:
        for origin, _, _ in sample_queries(tt, 5, seed=11):
            dlist = [s for s in range(tt.n_stops) if s != origin][:6]
            pruned = otm_rraptor(tt, origin, dlist, 3, prune=True)
            full = otm_rraptor(tt, origin, dlist, 3, prune=False)
            assert pruned.rows == full.rows


def test_queries_agree_with_oracle(synth_instances):
    for tt, _ in synth_instances:
        te = build_te_graph(tt, 3)
        for origin, target, departure in sample_queries(tt, 15, seed=5):
            expected = oracle_pareto(tt, origin, target, departure, 3, te=te)
            assert raptor_query(tt, origin, target, departure, 3).pareto == expected


def test_single_destination_range_query(toy):
    s0, sd = toy.stop_index("s0"), toy.stop_index("sd")
    rows = rraptor(toy, s0, sd, 4, tlist=[EIGHT_AM, EIGHT_AM + 600])
    assert [when for when, _ in rows] == [EIGHT_AM + 600, EIGHT_AM]
    assert dict(rows)[EIGHT_AM] == ((32400, 0), (31800, 2))
    assert dict(rows)[EIGHT_AM + 600] == ((33000, 0), (32400, 2))


def test_one_to_many_does_less_work_than_separate_runs(synth_instances):
    shared, separate = 0, 0
    for tt, _ in synth_instances:
        for origin, _, _ in sample_queries(tt, 3, seed=2):
            dlist = [s for s in range(tt.n_stops) if s != origin][:5]
            stats = SearchStats()
            otm_rraptor(tt, origin, dlist, 3, stats=stats)
            shared += stats.labels_updated
            for target in dlist:
                single = SearchStats()
                rraptor(tt, origin, target, 3, stats=single)
                separate += single.labels_updated
    assert shared < separate
