# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Trip-based bicriterion queries over a precomputed transfer set.

Round n scans trip segments (t, h, k) reached with n transfers: the trip was
boarded at index h and stops h+1..k are new. ind[n, t] is the first index
from which trip t has been reached with at most n transfers; reaching a trip
also truncates every later trip of the same route (FIFO). One-To-Many range
queries keep ind and the destination labels across departures.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .log_helpers import logger
from .pareto import (
    INF,
    Journey,
    Leg,
    Profile,
    ProfileRow,
    QueryResult,
    SearchStats,
    build_profile,
    departure_times,
    pareto_from_round_labels,
)
from .settings import JOURNEY_CAP, MAX_TRANSFERS
from .timetable import Timetable
from .transfer_set import TransferSet

# Parent of a segment: (previous segment id, alighting index) or None for a boarding at the origin.
SegmentParent = Optional[Tuple[int, int]]


@dataclass
class _Segment:
    trip: int
    board: int
    end: int
    parents: List[SegmentParent] = field(default_factory=list)


class TripBasedSearch:
    """Label state for one origin and a list of destinations."""

    def __init__(
        self,
        tt: Timetable,
        transfers: TransferSet,
        origin: int,
        targets: Sequence[int],
        max_transfers: int = MAX_TRANSFERS,
        trip_filter: Optional[np.ndarray] = None,
        prune: bool = True,
        record_journeys: bool = False,
        stats: Optional[SearchStats] = None,
        journey_cap: int = JOURNEY_CAP,
    ):
        if max_transfers < 0:
            raise ValueError("max_transfers must be >= 0")
        if transfers.n_trips != tt.n_trips:
            raise ValueError("transfer set does not belong to this timetable")
        self.tt = tt
        self.transfers = transfers
        self.origin = tt.check_stop(origin)
        self.targets = list(dict.fromkeys(tt.check_stop(s) for s in targets))
        self.max_transfers = max_transfers
        self.prune = prune
        self.record = record_journeys
        self.stats = stats
        self.journey_cap = journey_cap
        self.warnings: List[str] = []

        self.trip_filter = None if trip_filter is None else np.asarray(trip_filter, dtype=bool)
        self.trip_end = np.empty(tt.n_trips, dtype=np.int64)
        for route in tt.routes:
            self.trip_end[route.first_trip:route.first_trip + route.n_trips] = route.first_trip + route.n_trips
        lengths = np.fromiter((len(trip) - 1 for trip in tt.trips), dtype=np.int64, count=tt.n_trips)
        self.ind = np.tile(lengths, (max_transfers + 1, 1))

        # Destination index: route -> [(target slot, stop index, walk to target)].
        self.lines: Dict[int, List[Tuple[int, int, int]]] = {}
        for slot, target in enumerate(self.targets):
            for stop, walk in tt.walks_from(target):
                for route_id, index in tt.stop_routes[stop]:
                    if index > 0:
                        self.lines.setdefault(route_id, []).append((slot, index, walk))
        self.walk_in = {
            slot: walk
            for slot, target in enumerate(self.targets)
            for stop, walk in tt.walks_from(target)
            if stop == self.origin
        }

        self.labels = np.full((len(self.targets), max_transfers + 1), INF, dtype=np.int64)
        self.label_parents: Dict[Tuple[int, int], Tuple[int, List[Optional[Tuple[int, int]]]]] = {}
        self.run_index = 0
        self._arena: List[_Segment] = []
        self._capped = False

    # -- queueing --------------------------------------------------------

    def _enqueue(self, trip: int, index: int, n: int, parent: SegmentParent,
                 queue: Deque[int], seen: Dict[Tuple[int, int], int]) -> None:
        if self.trip_filter is not None and not self.trip_filter[trip]:
            return
        key = (trip, index)
        existing = seen.get(key)
        if existing is not None:
            if self.record and parent not in self._arena[existing].parents:
                self._arena[existing].parents.append(parent)
            return
        if index >= self.ind[n, trip]:
            return
        seen[key] = len(self._arena)
        queue.append(len(self._arena))
        self._arena.append(_Segment(trip, index, int(self.ind[n, trip]), [parent]))
        end = int(self.trip_end[trip])
        np.minimum(self.ind[n:, trip:end], index, out=self.ind[n:, trip:end])

    def _improve(self, slot: int, n: int, value: int, parent) -> None:
        row = self.labels[slot]
        if value < row[n]:
            np.minimum(row[n:], value, out=row[n:])
            if self.record:
                self.label_parents[(slot, n)] = (self.run_index, [parent])
            if self.stats is not None:
                self.stats.labels_updated += 1
        elif value == row[n] and self.record:
            stamp, entries = self.label_parents.get((slot, n), (-1, []))
            if stamp == self.run_index and parent not in entries:
                entries.append(parent)

    # -- one departure -------------------------------------------------

    def run(self, departure: int) -> None:
        tt = self.tt
        stats = self.stats
        self.run_index += 1
        self._arena = []
        if stats is not None:
            stats.runs += 1
        rounds = self.max_transfers + 1
        queues: List[Deque[int]] = [deque() for _ in range(rounds)]
        seen: List[Dict[Tuple[int, int], int]] = [{} for _ in range(rounds)]

        for slot, walk in self.walk_in.items():
            self._improve(slot, 0, departure + walk, None)

        for stop, walk in tt.walks_from(self.origin):
            for route_id, index in tt.stop_routes[stop]:
                route = tt.routes[route_id]
                if index == len(route) - 1:
                    continue
                position = route.earliest_trip(index, departure + walk)
                if position is not None:
                    self._enqueue(route.first_trip + position, index, 0, None, queues[0], seen[0])

        active = list(range(len(self.targets)))
        for n in range(rounds):
            if not queues[n] or not active:
                break
            if stats is not None:
                stats.rounds += 1
            active_set = set(active)
            scope = set()
            while queues[n]:
                segment_id = queues[n].popleft()
                segment = self._arena[segment_id]
                trip = tt.trips[segment.trip]
                h, k = segment.board, segment.end
                if stats is not None:
                    stats.segments_scanned += 1

                for slot, index, walk in self.lines.get(trip.route, ()):
                    if h < index <= k and slot in active_set:
                        self._improve(slot, n, trip.arr[index] + walk, (segment_id, index))

                first_arrival = trip.arr[h + 1]
                expand = False
                for slot in active:
                    if first_arrival < self.labels[slot, n]:
                        scope.add(slot)
                        expand = True
                if not expand or n + 1 >= rounds:
                    continue
                for i, other, j in self.transfers.between(segment.trip, h + 1, k):
                    if stats is not None:
                        stats.transfers_examined += 1
                    self._enqueue(other, j, n + 1, (segment_id, i), queues[n + 1], seen[n + 1])

            if self.prune:
                dropped = [slot for slot in active if slot not in scope]
                if stats is not None:
                    stats.dropped_targets.extend((departure, n, self.targets[slot]) for slot in dropped)
                active = [slot for slot in active if slot in scope]

    # -- output ------------------------------------------------------------

    def round_labels(self, target: int) -> List[int]:
        return [int(x) for x in self.labels[self.targets.index(target)]]

    def pareto(self, target: int):
        return pareto_from_round_labels(self.labels[self.targets.index(target)])

    def _segment_legs(self, segment_id: int, alight: int, depth: int = 0) -> List[Tuple[Leg, ...]]:
        segment = self._arena[segment_id]
        leg = Leg(segment.trip, segment.board, alight)
        results: List[Tuple[Leg, ...]] = []
        for parent in segment.parents:
            if parent is None:
                results.append((leg,))
            else:
                for prefix in self._segment_legs(parent[0], parent[1], depth + 1):
                    results.append(prefix + (leg,))
            if len(results) >= self.journey_cap:
                self._capped = True
                return results[: self.journey_cap]
        return results

    def journeys(self, target: int, departure: int, pareto) -> List[Journey]:
        slot = self.targets.index(target)
        result: List[Journey] = []
        for arrival, transfers in pareto:
            _, parents = self.label_parents[(slot, transfers)]
            for parent in parents:
                options = [()] if parent is None else self._segment_legs(parent[0], parent[1])
                for legs in options[: self.journey_cap]:
                    result.append(Journey(departure, arrival, max(0, len(legs) - 1), legs))
        if self._capped:
            message = f"journey_enumeration_capped stop={target} departure={departure} cap={self.journey_cap}"
            logger.warning(message)
            self.warnings.append(message)
            self._capped = False
        return result


def tbtr_query(
    tt: Timetable,
    transfers: TransferSet,
    origin: int,
    target: int,
    departure: int,
    max_transfers: int = MAX_TRANSFERS,
    stats: Optional[SearchStats] = None,
    record_journeys: bool = False,
    trip_filter: Optional[np.ndarray] = None,
) -> QueryResult:
    """Pareto set (arrival, transfers) for one departure time."""
    search = TripBasedSearch(
        tt, transfers, origin, [target], max_transfers,
        trip_filter=trip_filter, record_journeys=record_journeys, stats=stats,
    )
    search.run(int(departure))
    pareto = search.pareto(search.targets[0])
    journeys = tuple(search.journeys(search.targets[0], int(departure), pareto)) if record_journeys else ()
    return QueryResult(pareto=pareto, journeys=journeys, warnings=search.warnings)


def otm_rtbtr(
    tt: Timetable,
    transfers: TransferSet,
    origin: int,
    dlist: Sequence[int],
    max_transfers: int = MAX_TRANSFERS,
    tlist: Optional[Sequence[int]] = None,
    prune: bool = True,
    stats: Optional[SearchStats] = None,
    record_journeys: bool = False,
    trip_filter: Optional[np.ndarray] = None,
) -> Profile:
    """One-To-Many range query sharing trip reach and labels across departures."""
    if not dlist:
        return Profile(rows={})
    if tlist is None:
        tlist = departure_times(tt, origin)
    search = TripBasedSearch(
        tt, transfers, origin, dlist, max_transfers,
        trip_filter=trip_filter, prune=prune, record_journeys=record_journeys, stats=stats,
    )
    return build_profile(search, tlist)


def rtbtr(
    tt: Timetable,
    transfers: TransferSet,
    origin: int,
    target: int,
    max_transfers: int = MAX_TRANSFERS,
    tlist: Optional[Sequence[int]] = None,
    prune: bool = True,
    stats: Optional[SearchStats] = None,
) -> List[ProfileRow]:
    """Range query to a single destination."""
    profile = otm_rtbtr(tt, transfers, origin, [target], max_transfers, tlist, prune=prune, stats=stats)
    return profile.rows[tt.check_stop(target)]
