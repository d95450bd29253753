# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Deterministic synthetic GTFS feeds: jittered grid networks and the toy network."""

import math
import pathlib
import zlib
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .footpaths import haversine_m
from .gtfs_feed import format_gtfs_time, write_feed
from .log_helpers import logger
from .settings import WALK_SPEED_MPS

# Grid spacing in degrees (roughly 450 m).
_LAT_STEP = 0.004
_LON_STEP = 0.006
_FIRST_DEPARTURE = 6 * 3600


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator per named purpose (instance, queries, partitioner) under one seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))]))


def _grid(n_stops: int, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    side = max(1, math.ceil(math.sqrt(n_stops)))
    cells = np.arange(n_stops)
    jitter = rng.uniform(-0.3, 0.3, size=(n_stops, 2))
    lat = 47.0 + (cells // side + jitter[:, 0]) * _LAT_STEP
    lon = 8.0 + (cells % side + jitter[:, 1]) * _LON_STEP
    return side, np.column_stack((lat, lon))


def _grid_neighbors(index: int, side: int, n_stops: int) -> List[int]:
    row, col = divmod(index, side)
    result = []
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        r, c = row + dr, col + dc
        if 0 <= c < side and r >= 0 and r * side + c < n_stops:
            result.append(r * side + c)
    return result


def _random_walk(length: int, side: int, n_stops: int, rng: np.random.Generator) -> List[int]:
    path = [int(rng.integers(n_stops))]
    while len(path) < length:
        options = [s for s in _grid_neighbors(path[-1], side, n_stops) if s not in path]
        if not options:
            break
        path.append(int(options[int(rng.integers(len(options)))]))
    return path


def synthesize_feed(
    directory: Any,
    stops: int = 30,
    routes: int = 8,
    trips_per_route: int = 12,
    footpath_density: float = 0.1,
    seed: int = 7,
) -> pathlib.Path:
    """Write a GTFS feed; identical parameters give byte-identical files."""
    if stops < 2 or routes < 1 or trips_per_route < 1:
        raise ValueError("stops >= 2, routes >= 1 and trips_per_route >= 1 are required")
    if not 0.0 <= footpath_density <= 1.0:
        raise ValueError("footpath_density must lie in [0, 1]")
    rng = substream(seed, "instance")
    side, coords = _grid(stops, rng)
    stop_ids = [f"S{i:04d}" for i in range(stops)]

    trip_rows: List[Dict[str, Any]] = []
    time_rows: List[Dict[str, Any]] = []
    edges: List[Tuple[int, int]] = []
    longest = max(3, min(12, stops // 3 + 2))
    for r in range(routes):
        route_id = f"R{r:03d}"
        path = _random_walk(int(rng.integers(2, longest + 1)), side, stops, rng)
        if len(path) < 2:
            path = [path[0], _grid_neighbors(path[0], side, stops)[0]]
        edges.extend(zip(path, path[1:]))
        headway = int(rng.choice([300, 600, 900, 1200]))
        first = _FIRST_DEPARTURE + int(rng.integers(0, headway // 60)) * 60
        hops = rng.integers(2, 7, size=len(path) - 1) * 60
        dwell = int(rng.choice([0, 30]))
        for k in range(trips_per_route):
            trip_id = f"{route_id}_{k:03d}"
            trip_rows.append({"trip_id": trip_id, "route_id": route_id, "service_id": "daily"})
            clock = first + k * headway
            for sequence, stop in enumerate(path):
                arrival = clock
                departure = arrival + (dwell if 0 < sequence < len(path) - 1 else 0)
                time_rows.append({
                    "trip_id": trip_id,
                    "arrival_time": format_gtfs_time(arrival),
                    "departure_time": format_gtfs_time(departure),
                    "stop_id": stop_ids[stop],
                    "stop_sequence": sequence + 1,
                })
                if sequence < len(path) - 1:
                    clock = departure + int(hops[sequence])

    transfer_rows: List[Dict[str, Any]] = []
    for a in range(stops):
        for b in _grid_neighbors(a, side, stops):
            if a < b and rng.random() < footpath_density:
                meters = float(haversine_m(coords[a, 0], coords[a, 1], coords[b, 0], coords[b, 1]))
                seconds = int(round(meters / WALK_SPEED_MPS))
                edges.append((a, b))
                for x, y in ((a, b), (b, a)):
                    transfer_rows.append({
                        "from_stop_id": stop_ids[x], "to_stop_id": stop_ids[y],
                        "transfer_type": 2, "min_transfer_time": seconds,
                    })

    stops_frame = pd.DataFrame({
        "stop_id": stop_ids, "stop_name": stop_ids, "stop_lat": coords[:, 0], "stop_lon": coords[:, 1],
    })
    transfers_frame = pd.DataFrame(
        transfer_rows, columns=["from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time"],
    )
    target = write_feed(directory, stops_frame, pd.DataFrame(trip_rows), pd.DataFrame(time_rows), transfers_frame)

    served = {s for edge in edges for s in edge}
    rows, cols = zip(*edges) if edges else ((), ())
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(stops, stops))
    components, _ = connected_components(graph, directed=False)
    if len(served) < stops or components > 1:
        logger.warning(
            "synth_network_disconnected stops=%d served=%d components=%d seed=%d",
            stops, len(served), components, seed,
        )
    logger.info("synth_feed_written dir=%s stops=%d routes=%d trips=%d", target, stops, routes, len(trip_rows))
    return target


TOY_STOPS = ("s0", "s2", "s3", "s5", "s6", "s7", "s8", "s9", "sd")
TOY_ROUTES = {
    "r1": ("s0", "s2", "s3"),
    "r2": ("s0", "s5", "s8"),
    "r3": ("s2", "s6", "s9"),
    "r4": ("s8", "s9"),
    "r5": ("s9", "s7", "sd"),
}


def write_toy_feed(directory: Any) -> pathlib.Path:
    """The five-route example network: 7 trips per route every 10 min from 08:00, s3-sd walk of 40 min."""
    stops_frame = pd.DataFrame({
        "stop_id": TOY_STOPS,
        "stop_name": TOY_STOPS,
        "stop_lat": [47.0 + 0.005 * i for i in range(len(TOY_STOPS))],
        "stop_lon": [8.0 + 0.007 * i for i in range(len(TOY_STOPS))],
    })
    trip_rows: List[Dict[str, Any]] = []
    time_rows: List[Dict[str, Any]] = []
    for k in range(7):
        for r, (route_id, path) in enumerate(TOY_ROUTES.items(), start=1):
            trip_id = f"t{5 * k + r}"
            trip_rows.append({"trip_id": trip_id, "route_id": route_id, "service_id": "daily"})
            for sequence, stop in enumerate(path):
                stamp = format_gtfs_time(8 * 3600 + 600 * k + 600 * sequence)
                time_rows.append({
                    "trip_id": trip_id, "arrival_time": stamp, "departure_time": stamp,
                    "stop_id": stop, "stop_sequence": sequence + 1,
                })
    transfers = pd.DataFrame([
        {"from_stop_id": "s3", "to_stop_id": "sd", "transfer_type": 2, "min_transfer_time": 2400},
        {"from_stop_id": "sd", "to_stop_id": "s3", "transfer_type": 2, "min_transfer_time": 2400},
    ])
    return write_feed(directory, stops_frame, pd.DataFrame(trip_rows), pd.DataFrame(time_rows), transfers)
