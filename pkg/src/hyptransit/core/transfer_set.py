# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Trip-transfer set: generation, U-turn removal and reduction to improving transfers."""

import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .log_helpers import logger, progress_steps
from .pareto import INF
from .timetable import Timetable

STAGES = ("generated", "uturn_free", "reduced")

# (from_index, to_trip, to_index)
Transfer = Tuple[int, int, int]


class TransferSet:
    """Transfers grouped per source trip in CSR form, rows sorted by (i, t', j)."""

    def __init__(
        self,
        offsets: np.ndarray,
        from_index: np.ndarray,
        to_trip: np.ndarray,
        to_index: np.ndarray,
        stage: str = "generated",
    ):
        if stage not in STAGES:
            raise ValueError(f"unknown transfer stage {stage!r}")
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.from_index = np.asarray(from_index, dtype=np.int32)
        self.to_trip = np.asarray(to_trip, dtype=np.int32)
        self.to_index = np.asarray(to_index, dtype=np.int32)
        self.stage = stage
        self._rows: Dict[int, List[Transfer]] = {}

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Transfer]], stage: str = "generated") -> "TransferSet":
        counts = np.fromiter((len(r) for r in rows), dtype=np.int64, count=len(rows))
        offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        flat = [item for r in rows for item in sorted(r)]
        data = np.asarray(flat, dtype=np.int32).reshape(-1, 3)
        return cls(offsets, data[:, 0], data[:, 1], data[:, 2], stage)

    @property
    def n_trips(self) -> int:
        return int(self.offsets.shape[0] - 1)

    def __len__(self) -> int:
        return int(self.offsets[-1])

    def rows(self, trip: int) -> List[Transfer]:
        cached = self._rows.get(trip)
        if cached is None:
            lo, hi = int(self.offsets[trip]), int(self.offsets[trip + 1])
            cached = list(zip(
                self.from_index[lo:hi].tolist(), self.to_trip[lo:hi].tolist(), self.to_index[lo:hi].tolist(),
            ))
            self._rows[trip] = cached
        return cached

    def between(self, trip: int, first: int, last: int) -> List[Transfer]:
        """Transfers of `trip` leaving at stop indices first..last inclusive."""
        lo, hi = int(self.offsets[trip]), int(self.offsets[trip + 1])
        column = self.from_index[lo:hi]
        start = int(np.searchsorted(column, first, side="left"))
        stop = int(np.searchsorted(column, last, side="right"))
        return self.rows(trip)[start:stop]

    def all_rows(self) -> List[List[Transfer]]:
        return [self.rows(trip) for trip in range(self.n_trips)]

    def filtered(self, keep: Callable[[int, Transfer], bool], stage: str) -> "TransferSet":
        return TransferSet.from_rows(
            [[row for row in self.rows(trip) if keep(trip, row)] for trip in range(self.n_trips)], stage,
        )

    def contains(self, trip: int, from_index: int, to_trip: int, to_index: int) -> bool:
        return (from_index, to_trip, to_index) in self.rows(trip)

    def equals(self, other: "TransferSet") -> bool:
        return (
            self.stage == other.stage
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.from_index, other.from_index)
            and np.array_equal(self.to_trip, other.to_trip)
            and np.array_equal(self.to_index, other.to_index)
        )


# -- per-trip kernels (module level so worker processes can import them) ------

_WORKER_TT: Optional[Timetable] = None
_WORKER_TRANSFERS: Optional[TransferSet] = None


def _init_worker(tt: Timetable, transfers: Optional[TransferSet]) -> None:
    global _WORKER_TT, _WORKER_TRANSFERS
    _WORKER_TT = tt
    _WORKER_TRANSFERS = transfers


def _generate_for_trip(tt: Timetable, trip_id: int) -> List[Transfer]:
    trip = tt.trips[trip_id]
    found: List[Transfer] = []
    for i in range(1, len(trip)):
        for stop, walk in tt.walks_from(trip.stops[i]):
            ready = trip.arr[i] + walk
            for route_id, j in tt.stop_routes[stop]:
                route = tt.routes[route_id]
                if j == len(route) - 1:
                    continue
                position = route.earliest_trip(j, ready)
                if position is None:
                    continue
                if route_id != trip.route or position < trip.position or j < i:
                    found.append((i, route.first_trip + position, j))
    return sorted(set(found))


def _reduce_for_trip(tt: Timetable, transfers: TransferSet, trip_id: int,
                     labels: np.ndarray, generation: np.ndarray, stamp: int) -> List[Transfer]:
    trip = tt.trips[trip_id]
    rows = transfers.rows(trip_id)

    def improve(stop: int, value: int) -> bool:
        if generation[stop] != stamp or value < labels[stop]:
            generation[stop] = stamp
            labels[stop] = value
            return True
        return False

    kept: List[Transfer] = []
    cursor = len(rows)
    for i in range(len(trip) - 1, 0, -1):
        for stop, walk in tt.walks_from(trip.stops[i]):
            improve(stop, trip.arr[i] + walk)
        start = cursor
        while start > 0 and rows[start - 1][0] == i:
            start -= 1
        for row in rows[start:cursor]:
            _, target, j = row
            other = tt.trips[target]
            keep = False
            for k in range(j + 1, len(other)):
                for stop, walk in tt.walks_from(other.stops[k]):
                    if improve(stop, other.arr[k] + walk):
                        keep = True
            if keep:
                kept.append(row)
        cursor = start
    return sorted(kept)


def _generate_chunk(trip_ids: Sequence[int]) -> List[List[Transfer]]:
    return [_generate_for_trip(_WORKER_TT, t) for t in trip_ids]


def _reduce_chunk(trip_ids: Sequence[int]) -> List[List[Transfer]]:
    labels = np.full(_WORKER_TT.n_stops, INF, dtype=np.int64)
    generation = np.zeros(_WORKER_TT.n_stops, dtype=np.int64)
    return [
        _reduce_for_trip(_WORKER_TT, _WORKER_TRANSFERS, t, labels, generation, stamp + 1)
        for stamp, t in enumerate(trip_ids)
    ]


def _run_parallel(tt: Timetable, transfers: Optional[TransferSet], chunk_fn, workers: int) -> List[List[Transfer]]:
    chunk_size = max(1, tt.n_trips // (workers * 4) or 1)
    chunks = [list(range(lo, min(lo + chunk_size, tt.n_trips))) for lo in range(0, tt.n_trips, chunk_size)]
    rows: List[List[Transfer]] = []
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(tt, transfers)) as pool:
        # map() yields in submission order, which keeps the merge deterministic.
        for part in pool.map(chunk_fn, chunks):
            rows.extend(part)
    return rows


# -- public stages ------------------------------------------------------------

def generate_transfers(tt: Timetable, workers: int = 1) -> TransferSet:
    """Every feasible transfer to the earliest reachable trip of each route."""
    started = time.perf_counter()
    if workers > 1 and tt.n_trips > 1:
        rows = _run_parallel(tt, None, _generate_chunk, workers)
    else:
        rows = [_generate_for_trip(tt, t) for t in progress_steps("transfer_generation", tt.n_trips)]
    result = TransferSet.from_rows(rows, "generated")
    logger.info(
        "transfer_generation_done trips=%d transfers=%d elapsed=%.3fs",
        tt.n_trips, len(result), time.perf_counter() - started,
    )
    return result


def remove_uturns(tt: Timetable, transfers: TransferSet) -> TransferSet:
    """Drop transfers where staying on t one stop back reaches the stop after j in time."""
    started = time.perf_counter()

    def keep(trip_id: int, row: Transfer) -> bool:
        i, target, j = row
        trip, other = tt.trips[trip_id], tt.trips[target]
        if j + 1 >= len(other):
            return True
        return not (trip.stops[i - 1] == other.stops[j + 1] and trip.arr[i - 1] <= other.dep[j + 1])

    result = transfers.filtered(keep, "uturn_free")
    logger.info(
        "uturn_removal_done before=%d after=%d elapsed=%.3fs",
        len(transfers), len(result), time.perf_counter() - started,
    )
    return result


def reduce_transfers(tt: Timetable, transfers: TransferSet, workers: int = 1) -> TransferSet:
    """Keep a transfer only if it improves some stop's arrival over staying on the trip."""
    started = time.perf_counter()
    if workers > 1 and tt.n_trips > 1:
        rows = _run_parallel(tt, transfers, _reduce_chunk, workers)
    else:
        labels = np.full(tt.n_stops, INF, dtype=np.int64)
        generation = np.zeros(tt.n_stops, dtype=np.int64)
        rows = [
            _reduce_for_trip(tt, transfers, t, labels, generation, t + 1)
            for t in progress_steps("transfer_reduction", tt.n_trips)
        ]
    result = TransferSet.from_rows(rows, "reduced")
    logger.info(
        "transfer_reduction_done before=%d after=%d elapsed=%.3fs",
        len(transfers), len(result), time.perf_counter() - started,
    )
    return result


def preprocess_transfers(
    tt: Timetable, stage: str = "reduced", workers: int = 1,
) -> Tuple[TransferSet, Dict[str, Any]]:
    """Run the pipeline up to `stage`; stats carry size and seconds per stage."""
    if stage not in STAGES:
        raise ValueError(f"unknown transfer stage {stage!r}")
    stats: Dict[str, Any] = {"T-size": {}, "T-time": {}}

    started = time.perf_counter()
    current = generate_transfers(tt, workers)
    stats["T-size"]["generated"] = len(current)
    stats["T-time"]["generated"] = round(time.perf_counter() - started, 6)
    if stage != "generated":
        started = time.perf_counter()
        current = remove_uturns(tt, current)
        stats["T-size"]["uturn_free"] = len(current)
        stats["T-time"]["uturn_free"] = round(time.perf_counter() - started, 6)
    if stage == "reduced":
        started = time.perf_counter()
        current = reduce_transfers(tt, current, workers)
        stats["T-size"]["reduced"] = len(current)
        stats["T-time"]["reduced"] = round(time.perf_counter() - started, 6)
    stats["stage"] = current.stage
    return current, stats
