# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Footpath generation and transitive closure."""

from typing import Iterable, List, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from .errors import FootpathError
from .log_helpers import logger
from .settings import FOOTPATH_COMPONENT_CAP, WALK_SPEED_MPS
from .timetable import FootpathGraph

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1: np.ndarray, lon1: np.ndarray, lat2: np.ndarray, lon2: np.ndarray) -> np.ndarray:
    """Great-circle distance in meters between coordinate arrays (degrees)."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _unit_vectors(coords: np.ndarray) -> np.ndarray:
    lat = np.radians(coords[:, 0])
    lon = np.radians(coords[:, 1])
    return np.column_stack((np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)))


def candidate_pairs(coords: np.ndarray, threshold_s: int, speed: float = WALK_SPEED_MPS) -> List[Tuple[int, int, int]]:
    """Pairs (a < b, duration) of stops whose walking time is within `threshold_s`."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if coords.shape[0] < 2 or threshold_s <= 0:
        return []
    if speed <= 0:
        raise FootpathError(f"walking speed must be positive, got {speed}")

    max_distance = threshold_s * speed
    # Chord length on the unit sphere bounding the great-circle radius.
    chord = 2.0 * np.sin(min(np.pi, max_distance / EARTH_RADIUS_M) / 2.0) * (1.0 + 1e-9)
    tree = cKDTree(_unit_vectors(coords))
    raw = tree.query_pairs(chord, output_type="ndarray")
    if raw.size == 0:
        return []

    a, b = raw[:, 0], raw[:, 1]
    distance = haversine_m(coords[a, 0], coords[a, 1], coords[b, 0], coords[b, 1])
    duration = np.rint(distance / speed).astype(np.int64)
    keep = duration <= threshold_s
    pairs = sorted(
        (int(min(x, y)), int(max(x, y)), int(d))
        for x, y, d in zip(a[keep], b[keep], duration[keep])
    )
    return pairs


def close_footpaths(
    n_stops: int,
    pairs: Iterable[Tuple[int, int, int]],
    cap: int = FOOTPATH_COMPONENT_CAP,
) -> Tuple[FootpathGraph, int]:
    """Transitively close a footpath set with shortest-path durations.

    Returns the closed graph and how many existing pair durations were lowered
    by the closure. Components larger than `cap` stops raise FootpathError.
    """
    rows: List[int] = []
    cols: List[int] = []
    weights: List[int] = []
    given = {}
    for a, b, duration in pairs:
        if a == b:
            continue
        if duration < 0:
            raise FootpathError(f"negative footpath duration between stops {a} and {b}")
        key = (min(a, b), max(a, b))
        if key in given and given[key] <= duration:
            continue
        given[key] = int(duration)

    if not given:
        return FootpathGraph(n_stops=n_stops, edges={}), 0

    for (a, b), duration in given.items():
        rows.append(a)
        cols.append(b)
        # csgraph treats explicit zeros as missing edges.
        weights.append(duration if duration > 0 else 1e-9)
    matrix = sparse.coo_matrix((weights, (rows, cols)), shape=(n_stops, n_stops)).tocsr()
    n_components, labels = csgraph.connected_components(matrix, directed=False)

    members_by_label: dict = {}
    for stop in np.unique(np.asarray(rows + cols)):
        members_by_label.setdefault(int(labels[stop]), []).append(int(stop))

    closed: List[Tuple[int, int, int]] = []
    adjusted = 0
    for members in members_by_label.values():
        if len(members) < 2:
            continue
        if len(members) > cap:
            raise FootpathError(
                f"footpath component of {len(members)} stops exceeds cap {cap} (contains stop {members[0]})"
            )
        sub = matrix[members][:, members]
        dist = csgraph.shortest_path(sub, method="D", directed=False)
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                duration = int(np.rint(dist[i, j]))
                key = (members[i], members[j])
                if key in given and given[key] != duration:
                    adjusted += 1
                closed.append((members[i], members[j], duration))

    logger.debug(
        "footpaths_closed components=%d pairs_in=%d pairs_out=%d adjusted=%d",
        n_components, len(given), len(closed), adjusted,
    )
    return FootpathGraph.from_pairs(n_stops, closed), adjusted


def build_footpaths(
    coords: np.ndarray,
    threshold_s: int,
    speed: float = WALK_SPEED_MPS,
    cap: int = FOOTPATH_COMPONENT_CAP,
) -> Tuple[FootpathGraph, int]:
    """Geometric footpaths within `threshold_s`, transitively closed."""
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    pairs = candidate_pairs(coords, threshold_s, speed)
    logger.info("footpaths_generated stops=%d pairs=%d threshold_s=%d", coords.shape[0], len(pairs), threshold_s)
    return close_footpaths(coords.shape[0], pairs, cap=cap)
