# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Partition-pruned queries: HypTBTR over flagged trips, HypRAPTOR over flagged routes."""

from dataclasses import dataclass, field
from typing import Any, FrozenSet, Optional

import numpy as np

from .cells import NestedLayout, PartitionLayout
from .errors import LayoutMismatchError
from .fillin import FillInSet
from .log_helpers import logger
from .pareto import QueryResult, SearchStats
from .raptor_engine import raptor_query
from .settings import MAX_TRANSFERS
from .tbtr_engine import tbtr_query
from .timetable import Timetable
from .transfer_set import TransferSet


@dataclass(frozen=True)
class Labeling:
    source_stops: FrozenSet[int]
    target_stops: FrozenSet[int]
    source_routes: FrozenSet[int]
    target_routes: FrozenSet[int]


def labeling(layout: PartitionLayout, origin: int, target: int) -> Labeling:
    """Cells of both endpoints; a cutstop maps to (S_0, no routes)."""

    def lookup(stop: int):
        if not 0 <= stop < layout.n_stops:
            raise LayoutMismatchError(f"stop {stop} is not covered by the layout")
        cell = int(layout.stop_cell[stop])
        if cell == 0:
            return layout.cutstops, frozenset()
        return layout.stops_in(cell), layout.routes_in(cell)

    source_stops, source_routes = lookup(origin)
    target_stops, target_routes = lookup(target)
    return Labeling(source_stops, target_stops, source_routes, target_routes)


@dataclass
class HypContext:
    """Layout plus fill-in; flags are rebuilt for every query."""

    tt: Timetable
    layout: Any
    fillin: FillInSet
    leaf: PartitionLayout = field(init=False)
    _fill_trips: np.ndarray = field(init=False, repr=False)
    _fill_routes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.leaf = self.layout.flatten() if isinstance(self.layout, NestedLayout) else self.layout
        self.leaf.check_timetable(self.tt)
        if any(t >= self.tt.n_trips for t in self.fillin.trips) or any(r >= self.tt.n_routes for r in self.fillin.routes):
            raise LayoutMismatchError("fill-in references trips or routes outside the timetable")
        self._fill_trips = self.fillin.trip_flags(self.tt)
        self._fill_routes = np.zeros(self.tt.n_routes, dtype=bool)
        self._fill_routes[sorted(self.fillin.routes)] = True
        logger.debug(
            "hyp_context_ready cells=%d fill_trips=%d fill_routes=%d",
            self.leaf.p, len(self.fillin.trips), len(self.fillin.routes),
        )

    def labeling(self, origin: int, target: int) -> Labeling:
        return labeling(self.leaf, origin, target)

    def route_flags(self, origin: int, target: int) -> np.ndarray:
        cells = self.labeling(origin, target)
        flags = self._fill_routes.copy()
        flags[sorted(cells.source_routes | cells.target_routes)] = True
        return flags

    def trip_flags(self, origin: int, target: int) -> np.ndarray:
        cells = self.labeling(origin, target)
        flags = self._fill_trips.copy()
        for route in cells.source_routes | cells.target_routes:
            flags[self.tt.route_trip_ids(route)] = True
        return flags


def hyptbtr_query(
    tt: Timetable,
    transfers: TransferSet,
    ctx: HypContext,
    origin: int,
    target: int,
    departure: int,
    max_transfers: int = MAX_TRANSFERS,
    stats: Optional[SearchStats] = None,
    record_journeys: bool = False,
) -> QueryResult:
    """TBTR that only enqueues flagged trips."""
    if ctx.tt is not tt:
        ctx.leaf.check_timetable(tt)
    origin, target = tt.check_stop(origin), tt.check_stop(target)
    return tbtr_query(
        tt, transfers, origin, target, departure, max_transfers,
        stats=stats, record_journeys=record_journeys, trip_filter=ctx.trip_flags(origin, target),
    )


def hypraptor_query(
    tt: Timetable,
    ctx: HypContext,
    origin: int,
    target: int,
    departure: int,
    max_transfers: int = MAX_TRANSFERS,
    stats: Optional[SearchStats] = None,
    record_journeys: bool = False,
) -> QueryResult:
    """RAPTOR that only collects routes in the fill-in or in the endpoints' cells."""
    if ctx.tt is not tt:
        ctx.leaf.check_timetable(tt)
    origin, target = tt.check_stop(origin), tt.check_stop(target)
    return raptor_query(
        tt, origin, target, departure, max_transfers,
        stats=stats, record_journeys=record_journeys, route_filter=ctx.route_flags(origin, target),
    )
