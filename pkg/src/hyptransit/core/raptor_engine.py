# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Round-based bicriterion queries: RAPTOR, range rRAPTOR and One-To-Many rRAPTOR.

Labels are a (λ + 2) x |S| array: row k holds the best arrival using at most k
trips (row 0 is walking from the origin). A journey with k trips has k - 1
transfers, except walking-only journeys which count as 0 transfers. Labels are
kept across the departures of a range query, latest departure first.
"""

from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

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

# Parent entries: ("source", walk) | ("ride", route, position, board, alight) | ("walk", stop, duration, rides)
Parent = tuple


def transfer_labels(column: np.ndarray, max_transfers: int) -> List[int]:
    """Best arrival with at most n transfers for n = 0..λ from one stop's round column."""
    best = np.minimum.accumulate(column)
    return [int(best[n + 1]) for n in range(max_transfers + 1)]


class RaptorSearch:
    """Label state for one origin, shared by every departure of a range query."""

    def __init__(
        self,
        tt: Timetable,
        origin: int,
        targets: Sequence[int],
        max_transfers: int = MAX_TRANSFERS,
        route_filter: Optional[np.ndarray] = None,
        prune: bool = True,
        record_journeys: bool = False,
        stats: Optional[SearchStats] = None,
        journey_cap: int = JOURNEY_CAP,
    ):
        if max_transfers < 0:
            raise ValueError("max_transfers must be >= 0")
        self.tt = tt
        self.origin = tt.check_stop(origin)
        self.targets = list(dict.fromkeys(tt.check_stop(s) for s in targets))
        self.max_transfers = max_transfers
        self.rounds = max_transfers + 1
        self.route_filter = route_filter
        self.prune = prune
        self.record = record_journeys
        self.stats = stats
        self.journey_cap = journey_cap
        self.labels = np.full((self.rounds + 1, tt.n_stops), INF, dtype=np.int64)
        self.parents: Dict[Tuple[int, int], Tuple[int, List[Parent]]] = {}
        self.run_index = 0
        self.warnings: List[str] = []
        self._capped = False

    # -- label bookkeeping -------------------------------------------------

    def _set(self, k: int, stop: int, value: int, entry: Parent) -> None:
        self.labels[k, stop] = value
        if self.record:
            self.parents[(k, stop)] = (self.run_index, [entry])
        if self.stats is not None:
            self.stats.labels_updated += 1

    def _tie(self, k: int, stop: int, entry: Parent) -> None:
        if not self.record:
            return
        stamp, entries = self.parents.get((k, stop), (-1, []))
        if stamp == self.run_index and entry not in entries:
            entries.append(entry)

    def _bound(self, k: int, active: List[int]) -> int:
        if not active:
            return INF
        return int(self.labels[k, active].max())

    # -- one departure ---------------------------------------------------

    def run(self, departure: int) -> None:
        tt = self.tt
        labels = self.labels
        self.run_index += 1
        stats = self.stats
        if stats is not None:
            stats.runs += 1
        active = list(self.targets)
        target_set = set(active)
        boarded: Set[Tuple[int, int]] = set()

        marked: Set[int] = set()
        for stop, walk in tt.walks_from(self.origin):
            value = departure + walk
            if value < labels[0, stop]:
                self._set(0, stop, value, ("source", walk))
                marked.add(stop)
            elif value == labels[0, stop]:
                self._tie(0, stop, ("source", walk))

        for k in range(1, self.rounds + 1):
            if not marked:
                break
            if self.prune:
                floor = min(int(labels[k - 1, p]) for p in marked)
                kept = []
                for s in active:
                    if labels[k - 1, s] <= floor:
                        if stats is not None:
                            stats.dropped_targets.append((departure, k, s))
                    else:
                        kept.append(s)
                active = kept
                target_set = set(active)
                if not active:
                    break
            if stats is not None:
                stats.rounds += 1
                stats.round_boardings.append([])

            np.minimum(labels[k], labels[k - 1], out=labels[k])
            bound = self._bound(k, active)

            queue: Dict[int, int] = {}
            for stop in marked:
                for route_id, index in tt.stop_routes[stop]:
                    if index == len(tt.routes[route_id]) - 1:
                        continue
                    if self.route_filter is not None and not self.route_filter[route_id]:
                        continue
                    if index < queue.get(route_id, index + 1):
                        queue[route_id] = index

            improved: Dict[int, int] = {}
            for route_id in sorted(queue):
                route = tt.routes[route_id]
                if stats is not None:
                    stats.routes_scanned += 1
                position: Optional[int] = None
                board = -1
                for j in range(queue[route_id], len(route)):
                    stop = route.stops[j]
                    if position is not None:
                        arrival = int(route.arrivals[position, j])
                        current = int(labels[k, stop])
                        if arrival < min(current, bound):
                            self._set(k, stop, arrival, ("ride", route_id, position, board, j))
                            improved[stop] = arrival
                            if stop in target_set:
                                bound = self._bound(k, active)
                        elif arrival == current and arrival <= bound:
                            self._tie(k, stop, ("ride", route_id, position, board, j))
                    if j == len(route) - 1:
                        break
                    reach = int(labels[k - 1, stop])
                    if reach < INF and (position is None or reach <= route.departures[position, j]):
                        candidate = route.earliest_trip(j, reach)
                        if candidate is not None and (position is None or candidate < position):
                            position, board = candidate, j
                            if stats is not None and (route_id, position) not in boarded:
                                boarded.add((route_id, position))
                                if route_id not in stats.round_boardings[-1]:
                                    stats.round_boardings[-1].append(route_id)

            marked = set(improved)
            rides_at = {stop: tuple(self.parents[(k, stop)][1]) for stop in improved} if self.record else {}
            for stop, arrival in sorted(improved.items()):
                rides = rides_at.get(stop, ())
                for other, walk in tt.footpaths.neighbors(stop):
                    value = arrival + walk
                    current = int(labels[k, other])
                    if value < min(current, bound):
                        self._set(k, other, value, ("walk", stop, walk, rides))
                        marked.add(other)
                        if other in target_set:
                            bound = self._bound(k, active)
                    elif value == current and value <= bound:
                        self._tie(k, other, ("walk", stop, walk, rides))

    # -- output ------------------------------------------------------------

    def pareto(self, stop: int):
        return pareto_from_round_labels(transfer_labels(self.labels[:, stop], self.max_transfers))

    def _expand(self, entries: Iterable[Parent], k: int) -> List[Tuple[Leg, ...]]:
        results: List[Tuple[Leg, ...]] = []
        for entry in entries:
            kind = entry[0]
            if kind == "source":
                results.append(())
            elif kind == "ride":
                _, route_id, position, board, alight = entry
                route = self.tt.routes[route_id]
                leg = Leg(route.first_trip + position, board, alight)
                for prefix in self._legs(k - 1, route.stops[board]):
                    results.append(prefix + (leg,))
            else:
                results.extend(self._expand(entry[3], k))
            if len(results) >= self.journey_cap:
                self._capped = True
                return results[: self.journey_cap]
        return results

    def _legs(self, k: int, stop: int) -> List[Tuple[Leg, ...]]:
        while k > 0 and self.labels[k - 1, stop] <= self.labels[k, stop]:
            k -= 1
        _, entries = self.parents[(k, stop)]
        return self._expand(entries, k)

    def journeys(self, stop: int, departure: int, pareto) -> List[Journey]:
        result = []
        column = self.labels[:, stop]
        for arrival, transfers in pareto:
            k = int(np.flatnonzero(column[: transfers + 2] == arrival)[0])
            for legs in self._legs(k, stop):
                result.append(Journey(departure, arrival, max(0, len(legs) - 1), legs))
        if self._capped:
            message = f"journey_enumeration_capped stop={stop} departure={departure} cap={self.journey_cap}"
            logger.warning(message)
            self.warnings.append(message)
            self._capped = False
        return result


def raptor_query(
    tt: Timetable,
    origin: int,
    target: int,
    departure: int,
    max_transfers: int = MAX_TRANSFERS,
    stats: Optional[SearchStats] = None,
    record_journeys: bool = False,
    route_filter: Optional[np.ndarray] = None,
) -> QueryResult:
    """Pareto set (arrival, transfers) for one departure time."""
    search = RaptorSearch(
        tt, origin, [target], max_transfers,
        route_filter=route_filter, record_journeys=record_journeys, stats=stats,
    )
    search.run(int(departure))
    pareto = search.pareto(search.targets[0])
    journeys = tuple(search.journeys(search.targets[0], int(departure), pareto)) if record_journeys else ()
    return QueryResult(pareto=pareto, journeys=journeys, warnings=search.warnings)


def otm_rraptor(
    tt: Timetable,
    origin: int,
    dlist: Sequence[int],
    max_transfers: int = MAX_TRANSFERS,
    tlist: Optional[Sequence[int]] = None,
    prune: bool = True,
    stats: Optional[SearchStats] = None,
    record_journeys: bool = False,
    route_filter: Optional[np.ndarray] = None,
) -> Profile:
    """One-To-Many range query: per destination, one Pareto row per departure in `tlist`."""
    if not dlist:
        return Profile(rows={})
    if tlist is None:
        tlist = departure_times(tt, origin)
    search = RaptorSearch(
        tt, origin, dlist, max_transfers,
        route_filter=route_filter, prune=prune, record_journeys=record_journeys, stats=stats,
    )
    return build_profile(search, tlist)


def rraptor(
    tt: Timetable,
    origin: int,
    target: int,
    max_transfers: int = MAX_TRANSFERS,
    tlist: Optional[Sequence[int]] = None,
    prune: bool = True,
    stats: Optional[SearchStats] = None,
) -> List[ProfileRow]:
    """Range query to a single destination."""
    profile = otm_rraptor(tt, origin, [target], max_transfers, tlist, prune=prune, stats=stats)
    return profile.rows[tt.check_stop(target)]
