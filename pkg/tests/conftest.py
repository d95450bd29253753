# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.gtfs_feed import build_timetable, load_gtfs
from hyptransit.core.synth import synthesize_feed
from hyptransit.core.timetable import FootpathGraph, Timetable
from hyptransit.core.transfer_set import preprocess_transfers

FIXTURES = Path(__file__).resolve().parent / "fixtures"
TOY_FEED = FIXTURES / "toy_feed"

# (stops, routes, trips_per_route, footpath_density, seed)
SYNTH_CASES = [
    (12, 4, 5, 0.3, 1),
    (20, 6, 6, 0.2, 2),
    (30, 8, 6, 0.1, 3),
]


@pytest.fixture(scope="session")
def toy():
    tt, _ = build_timetable(load_gtfs(TOY_FEED))
    return tt


@pytest.fixture(scope="session")
def toy_transfers(toy):
    transfers, _ = preprocess_transfers(toy, "generated")
    return transfers


@pytest.fixture(scope="session")
def synth_instances(tmp_path_factory):
    """Small synthetic timetables with their uturn_free transfer sets."""
    instances = []
    for stops, routes, trips, density, seed in SYNTH_CASES:
        feed = synthesize_feed(tmp_path_factory.mktemp(f"synth{seed}"), stops, routes, trips, density, seed)
        tt, _ = build_timetable(load_gtfs(feed), walk_threshold_s=1)
        transfers, _ = preprocess_transfers(tt, "uturn_free")
        instances.append((tt, transfers))
    return instances


# Three parents of two routes each; g* stops join parents, k* stops join a parent's two routes.
NESTED_STOPS = ["a1", "k1", "g1", "b1", "g2", "k2", "g3", "g4", "k3", "e1", "f1"]
NESTED_ROUTES = [
    ("a1", "k1", "g1"),
    ("k1", "b1", "g2"),
    ("g1", "k2", "g3"),
    ("k2", "g2", "g4"),
    ("g3", "k3", "e1"),
    ("k3", "g4", "f1"),
]


@pytest.fixture(scope="session")
def nested_network():
    index = {stop: k for k, stop in enumerate(NESTED_STOPS)}
    times = [28800, 29400, 30000]
    return Timetable.assemble(
        NESTED_STOPS,
        np.zeros((len(NESTED_STOPS), 2)),
        [tuple(index[s] for s in stops) for stops in NESTED_ROUTES],
        [[(f"r{k}", times, times)] for k in range(len(NESTED_ROUTES))],
        FootpathGraph.from_pairs(len(NESTED_STOPS), []),
    )
