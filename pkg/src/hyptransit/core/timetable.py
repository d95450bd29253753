# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Immutable (S, R, T, F) timetable model for one service day.

Stops, routes and trips are dense 0-based integers. Trip ids are route-major:
the trips of a route occupy the contiguous id range
``route.first_trip .. route.first_trip + len(route.trips) - 1`` in departure
order, so "every trip at or after t on its route" is an id slice.
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import TimetableError, UnknownStopError

Walk = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class Route:
    route_id: int
    stops: Tuple[int, ...]
    first_trip: int
    arrivals: np.ndarray
    departures: np.ndarray
    dep_by_stop: np.ndarray = field(repr=False)

    @property
    def n_trips(self) -> int:
        return int(self.arrivals.shape[0])

    @property
    def trips(self) -> range:
        return range(self.first_trip, self.first_trip + self.n_trips)

    def __len__(self) -> int:
        return len(self.stops)

    def earliest_trip(self, index: int, time: int) -> Optional[int]:
        """Position of the earliest trip departing stop `index` at or after `time`.

        Departure columns are sorted (FIFO), so equal departures resolve to the
        lowest position.
        """
        column = self.dep_by_stop[index]
        position = int(np.searchsorted(column, time, side="left"))
        if position >= column.shape[0]:
            return None
        return position


@dataclass(frozen=True, eq=False)
class Trip:
    trip_id: int
    route: int
    position: int
    gtfs_id: str
    stops: Tuple[int, ...]
    arr: Tuple[int, ...]
    dep: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.stops)


@dataclass(frozen=True)
class FootpathGraph:
    """Symmetric, transitively closed walking graph without self-loops."""

    n_stops: int
    edges: Mapping[int, Tuple[Walk, ...]]

    @classmethod
    def from_pairs(cls, n_stops: int, pairs: Iterable[Tuple[int, int, int]]) -> "FootpathGraph":
        adjacency: Dict[int, Dict[int, int]] = {}
        for a, b, duration in pairs:
            if a == b:
                continue
            for x, y in ((a, b), (b, a)):
                current = adjacency.setdefault(x, {}).get(y)
                if current is None or duration < current:
                    adjacency[x][y] = int(duration)
        edges = {stop: tuple(sorted(adj.items())) for stop, adj in sorted(adjacency.items())}
        return cls(n_stops=n_stops, edges=edges)

    def neighbors(self, stop: int) -> Tuple[Walk, ...]:
        return self.edges.get(stop, ())

    def duration(self, a: int, b: int) -> Optional[int]:
        if a == b:
            return 0
        for other, duration in self.edges.get(a, ()):
            if other == b:
                return duration
        return None

    def pairs(self) -> List[Tuple[int, int, int]]:
        """Unordered pairs (a < b, duration) in sorted order."""
        return [(a, b, d) for a, walks in sorted(self.edges.items()) for b, d in walks if a < b]

    def __len__(self) -> int:
        return sum(len(walks) for walks in self.edges.values()) // 2


@dataclass(frozen=True, eq=False)
class Timetable:
    stop_ids: Tuple[str, ...]
    coords: np.ndarray
    routes: Tuple[Route, ...]
    trips: Tuple[Trip, ...]
    footpaths: FootpathGraph
    stop_routes: Tuple[Tuple[Tuple[int, int], ...], ...]
    walks: Tuple[Tuple[Walk, ...], ...]
    _stop_lookup: Mapping[str, int] = field(repr=False)
    _trip_lookup: Mapping[str, int] = field(repr=False)

    @classmethod
    def assemble(
        cls,
        stop_ids: Sequence[str],
        coords: np.ndarray,
        route_stops: Sequence[Tuple[int, ...]],
        route_trips: Sequence[Sequence[Tuple[str, Sequence[int], Sequence[int]]]],
        footpaths: FootpathGraph,
    ) -> "Timetable":
        """Build a timetable from per-route stop sequences and ordered trip rows."""
        routes: List[Route] = []
        trips: List[Trip] = []
        for route_id, (stops, rows) in enumerate(zip(route_stops, route_trips)):
            arrivals = np.asarray([row[1] for row in rows], dtype=np.int64).reshape(len(rows), len(stops))
            departures = np.asarray([row[2] for row in rows], dtype=np.int64).reshape(len(rows), len(stops))
            first_trip = len(trips)
            routes.append(
                Route(
                    route_id=route_id,
                    stops=tuple(int(s) for s in stops),
                    first_trip=first_trip,
                    arrivals=arrivals,
                    departures=departures,
                    dep_by_stop=np.ascontiguousarray(departures.T),
                )
            )
            for position, (gtfs_id, arr, dep) in enumerate(rows):
                trips.append(
                    Trip(
                        trip_id=first_trip + position,
                        route=route_id,
                        position=position,
                        gtfs_id=str(gtfs_id),
                        stops=tuple(int(s) for s in stops),
                        arr=tuple(int(x) for x in arr),
                        dep=tuple(int(x) for x in dep),
                    )
                )

        n_stops = len(stop_ids)
        stop_routes: List[List[Tuple[int, int]]] = [[] for _ in range(n_stops)]
        for route in routes:
            for index, stop in enumerate(route.stops):
                stop_routes[stop].append((route.route_id, index))
        walks = tuple(((stop, 0),) + footpaths.neighbors(stop) for stop in range(n_stops))
        return cls(
            stop_ids=tuple(stop_ids),
            coords=np.asarray(coords, dtype=np.float64).reshape(n_stops, 2),
            routes=tuple(routes),
            trips=tuple(trips),
            footpaths=footpaths,
            stop_routes=tuple(tuple(entries) for entries in stop_routes),
            walks=walks,
            _stop_lookup={sid: index for index, sid in enumerate(stop_ids)},
            _trip_lookup={trip.gtfs_id: trip.trip_id for trip in trips},
        )

    @property
    def n_stops(self) -> int:
        return len(self.stop_ids)

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    @property
    def n_trips(self) -> int:
        return len(self.trips)

    @property
    def stop_events(self) -> int:
        return sum(route.n_trips * len(route) for route in self.routes)

    def stop_index(self, stop_id: str) -> int:
        try:
            return self._stop_lookup[stop_id]
        except KeyError:
            raise UnknownStopError(f"unknown stop id {stop_id!r}") from None

    def trip_index(self, gtfs_id: str) -> int:
        try:
            return self._trip_lookup[gtfs_id]
        except KeyError:
            raise TimetableError(f"unknown trip id {gtfs_id!r}") from None

    def check_stop(self, stop: int) -> int:
        if not isinstance(stop, (int, np.integer)) or not 0 <= int(stop) < self.n_stops:
            raise UnknownStopError(f"unknown stop index {stop!r}")
        return int(stop)

    def walks_from(self, stop: int) -> Tuple[Walk, ...]:
        """(stop', f(stop, stop')) over N(stop), the stop itself first with 0."""
        return self.walks[stop]

    def route_trip_ids(self, route_id: int) -> range:
        return self.routes[route_id].trips

    def describe(self) -> Dict[str, int]:
        return {
            "stops": self.n_stops,
            "routes": self.n_routes,
            "trips": self.n_trips,
            "footpaths": len(self.footpaths),
            "stopevents": self.stop_events,
        }


def neighborhood(tt: Timetable, stop: int) -> FrozenSet[int]:
    """N(s): stops reachable by one footpath, including s itself."""
    stop = tt.check_stop(stop)
    return frozenset(other for other, _ in tt.walks_from(stop))


def validate(tt: Timetable) -> None:
    """Re-check every structural invariant; raise TimetableError listing violations."""
    problems: List[str] = []

    for route in tt.routes:
        if len(route) < 2:
            problems.append(f"route {route.route_id} has fewer than 2 stops")
        arr, dep = route.arrivals, route.departures
        if arr.shape != dep.shape or arr.shape[1] != len(route):
            problems.append(f"route {route.route_id} has mismatched time columns")
            continue
        if np.any(dep < arr):
            problems.append(f"route {route.route_id} has a departure before its arrival")
        if arr.shape[1] > 1 and np.any(arr[:, 1:] < dep[:, :-1]):
            problems.append(f"route {route.route_id} has decreasing times along a trip")
        if arr.shape[0] > 1 and (np.any(np.diff(arr, axis=0) < 0) or np.any(np.diff(dep, axis=0) < 0)):
            problems.append(f"route {route.route_id} has overtaking trips")
        for position, trip_id in enumerate(route.trips):
            trip = tt.trips[trip_id]
            if trip.route != route.route_id or trip.position != position or trip.stops != route.stops:
                problems.append(f"trip {trip_id} is inconsistent with route {route.route_id}")

    covered = sum(route.n_trips for route in tt.routes)
    if covered != tt.n_trips:
        problems.append(f"routes cover {covered} trips but the timetable has {tt.n_trips}")

    for stop, entries in enumerate(tt.stop_routes):
        for route_id, index in entries:
            if tt.routes[route_id].stops[index] != stop:
                problems.append(f"stop index entry ({route_id}, {index}) does not point at stop {stop}")

    footpaths = tt.footpaths
    for a, walks in footpaths.edges.items():
        for b, duration in walks:
            if a == b:
                problems.append(f"footpath self-loop at stop {a}")
            if duration < 0:
                problems.append(f"negative footpath duration {a}-{b}")
            if footpaths.duration(b, a) != duration:
                problems.append(f"footpath {a}-{b} is not symmetric")
        # Closure and triangle inequality, checked within each neighborhood.
        for b, ab in walks:
            for c, bc in footpaths.neighbors(b):
                if c == a:
                    continue
                ac = footpaths.duration(a, c)
                if ac is None:
                    problems.append(f"footpaths not transitively closed: {a}-{b}-{c}")
                elif ac > ab + bc:
                    problems.append(f"triangle inequality violated: {a}-{c} > {a}-{b}-{c}")

    if problems:
        raise TimetableError("; ".join(problems[:20]))
