# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Result types shared by every query engine."""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .timetable import Timetable

# Sentinel arrival for unreached labels; large enough to survive additions of durations.
INF = int(np.iinfo(np.int64).max // 4)

ParetoSet = Tuple[Tuple[int, int], ...]
ProfileRow = Tuple[int, ParetoSet]


def pareto_filter(points: Iterable[Tuple[int, int]]) -> ParetoSet:
    """Non-dominated (arrival, transfers) pairs, ordered by transfers ascending."""
    result: List[Tuple[int, int]] = []
    best = INF
    for arrival, transfers in sorted(set((int(a), int(n)) for a, n in points), key=lambda p: (p[1], p[0])):
        if arrival >= INF:
            continue
        if arrival < best:
            result.append((arrival, transfers))
            best = arrival
    return tuple(result)


def pareto_from_round_labels(labels: Sequence[int]) -> ParetoSet:
    """Pareto set from per-transfer-count labels (labels[n] = best with exactly or at most n)."""
    result: List[Tuple[int, int]] = []
    best = INF
    for transfers, arrival in enumerate(labels):
        arrival = int(arrival)
        if arrival < best:
            result.append((arrival, transfers))
            best = arrival
    return tuple(result)


def dominates(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and a != b


@dataclass(frozen=True)
class Leg:
    trip: int
    board_index: int
    alight_index: int


@dataclass(frozen=True)
class Journey:
    departure: int
    arrival: int
    transfers: int
    legs: Tuple[Leg, ...]

    def describe(self, tt: Timetable) -> List[Dict[str, Any]]:
        """Leg list with GTFS identifiers and clock times, for printing."""
        rows = []
        for leg in self.legs:
            trip = tt.trips[leg.trip]
            rows.append(
                {
                    "trip": trip.gtfs_id,
                    "board": tt.stop_ids[trip.stops[leg.board_index]],
                    "departure": trip.dep[leg.board_index],
                    "alight": tt.stop_ids[trip.stops[leg.alight_index]],
                    "arrival": trip.arr[leg.alight_index],
                }
            )
        return rows


@dataclass
class SearchStats:
    """Work counters filled in by the engines when a stats object is passed."""

    runs: int = 0
    rounds: int = 0
    routes_scanned: int = 0
    segments_scanned: int = 0
    transfers_examined: int = 0
    labels_updated: int = 0
    round_boardings: List[List[int]] = field(default_factory=list)
    dropped_targets: List[Tuple[int, int, int]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def merge(self, other: "SearchStats") -> None:
        for name in ("runs", "rounds", "routes_scanned", "segments_scanned",
                     "transfers_examined", "labels_updated"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass
class QueryResult:
    pareto: ParetoSet
    journeys: Tuple[Journey, ...] = ()
    warnings: List[str] = field(default_factory=list)


@dataclass
class Profile:
    """One-To-Many output: per target, one (departure, ParetoSet) row per departure, latest first."""

    rows: Dict[int, List[ProfileRow]]
    journeys: Dict[int, Dict[int, List[Journey]]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def __getitem__(self, stop: int) -> List[ProfileRow]:
        return self.rows[stop]

    def at(self, stop: int, departure: int) -> ParetoSet:
        for when, pareto in self.rows.get(stop, ()):
            if when == departure:
                return pareto
        raise KeyError(departure)

    def used_trips(self) -> frozenset:
        return frozenset(
            leg.trip
            for per_stop in self.journeys.values()
            for journeys in per_stop.values()
            for journey in journeys
            for leg in journey.legs
        )


def departure_times(tt: Timetable, origin: int, horizon: Optional[int] = None) -> List[int]:
    """Distinct times one can leave `origin` to catch a trip at a stop of N(origin), latest first.

    A trip boarded at stop s' at index i (not the last) with walk f gives
    dep(t, i) - f. Negative times are dropped.
    """
    origin = tt.check_stop(origin)
    times = set()
    for stop, walk in tt.walks_from(origin):
        for route_id, index in tt.stop_routes[stop]:
            route = tt.routes[route_id]
            if index == len(route) - 1:
                continue
            for value in (route.dep_by_stop[index] - walk).tolist():
                if value >= 0 and (horizon is None or value <= horizon):
                    times.add(int(value))
    return sorted(times, reverse=True)


def pareto_to_json(pareto: ParetoSet) -> List[Dict[str, int]]:
    return [{"arrival": arrival, "transfers": transfers} for arrival, transfers in pareto]


def build_profile(search: Any, tlist: Sequence[int]) -> Profile:
    """Run `search` over `tlist` latest first; journeys are kept only for fresh Pareto entries."""
    rows: Dict[int, List[ProfileRow]] = {s: [] for s in search.targets}
    journeys: Dict[int, Dict[int, List[Journey]]] = {s: {} for s in search.targets}
    for departure in sorted(set(int(t) for t in tlist), reverse=True):
        search.run(departure)
        for stop in search.targets:
            pareto = search.pareto(stop)
            previous = rows[stop][-1][1] if rows[stop] else ()
            rows[stop].append((departure, pareto))
            if search.record:
                fresh = tuple(entry for entry in pareto if entry not in previous)
                if fresh:
                    journeys[stop][departure] = search.journeys(stop, departure, fresh)
    return Profile(rows=rows, journeys=journeys if search.record else {}, warnings=search.warnings)
