# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Cutstop profile workloads and fill-in sets.

A fill-in holds every trip (TBTR flavor) or route (RAPTOR flavor) that lies on
a reconstructed Pareto-optimal journey between two cutstops of the workload,
over the source's full departure list.
"""

import json
import pathlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .cells import NestedLayout, PartitionLayout
from .errors import LayoutMismatchError
from .log_helpers import logger, progress_steps
from .pareto import departure_times
from .raptor_engine import otm_rraptor
from .settings import MAX_TRANSFERS
from .snapshot_io import write_sidecar
from .tbtr_engine import otm_rtbtr
from .timetable import Timetable
from .transfer_set import TransferSet

FLAVORS = {"otm-rtbtr": "tbtr", "otm-rraptor": "raptor"}


@dataclass
class Workload:
    """Profile queries: (source cutstop, destination cutstops), sources ascending."""

    items: List[Tuple[int, Tuple[int, ...]]]
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def pairs(self) -> int:
        return sum(len(destinations) for _, destinations in self.items)

    def pair_set(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((s, d) for s, destinations in self.items for d in destinations)


def _workload(pairs: Dict[int, set], stats: Dict[str, int]) -> Workload:
    items = [(source, tuple(sorted(pairs[source]))) for source in sorted(pairs) if pairs[source]]
    workload = Workload(items=items, stats=stats)
    workload.stats["pqueries"] = workload.pairs
    return workload


def enumerate_pqueries_standard(layout: PartitionLayout) -> Workload:
    cutstops = sorted(layout.cutstops)
    pairs = {c: {d for d in cutstops if d != c} for c in cutstops}
    return _workload(pairs, {"sources": len(cutstops) if len(cutstops) > 1 else 0})


def enumerate_pqueries_multilevel(layout: NestedLayout) -> Workload:
    """Level-1 pairs, parent-to-child cross-level pairs both ways, and sibling pairs inside each parent."""
    pairs: Dict[int, set] = {}

    def add(a: int, b: int) -> bool:
        if a == b or b in pairs.get(a, ()):
            return False
        pairs.setdefault(a, set()).add(b)
        return True

    level1 = sorted(layout.level1_cutstops())
    top_count = sum(add(a, b) for a in level1 for b in level1)
    cross = siblings = 0
    for parent in sorted(layout.children):
        upper = sorted(layout.level1_of(parent))
        lower = sorted(layout.level2_cutstops(parent))
        cross += sum(add(a, b) + add(b, a) for a in upper for b in lower)
        siblings += sum(add(a, b) for a in lower for b in lower)
    return _workload(pairs, {"level1_pairs": top_count, "cross_pairs": cross, "sibling_pairs": siblings})


def enumerate_pqueries(layout: Any) -> Workload:
    if isinstance(layout, NestedLayout):
        return enumerate_pqueries_multilevel(layout)
    return enumerate_pqueries_standard(layout)


@dataclass
class FillInSet:
    flavor: str
    trips: FrozenSet[int]
    routes: FrozenSet[int]
    stats: Dict[str, Any] = field(default_factory=dict)

    def trip_flags(self, tt: Timetable) -> np.ndarray:
        """Per-trip membership; a RAPTOR-flavor fill-in flags every trip of its routes."""
        flags = np.zeros(tt.n_trips, dtype=bool)
        if self.flavor == "tbtr":
            flags[sorted(self.trips)] = True
        else:
            for route in self.routes:
                flags[tt.route_trip_ids(route)] = True
        return flags


# -- profile runs (module level so worker processes can import them) -------------

_WORKER_STATE: Dict[str, Any] = {}


def _init_worker(tt: Timetable, transfers: Optional[TransferSet], engine: str, max_transfers: int) -> None:
    _WORKER_STATE.update(tt=tt, transfers=transfers, engine=engine, max_transfers=max_transfers)


def _used(tt: Timetable, transfers: Optional[TransferSet], engine: str, max_transfers: int,
          source: int, destinations: Sequence[int]) -> Tuple[FrozenSet[int], List[str]]:
    tlist = departure_times(tt, source)
    if engine == "otm-rtbtr":
        profile = otm_rtbtr(tt, transfers, source, destinations, max_transfers, tlist, record_journeys=True)
    else:
        profile = otm_rraptor(tt, source, destinations, max_transfers, tlist, record_journeys=True)
    return profile.used_trips(), profile.warnings


def _used_in_worker(item: Tuple[int, Tuple[int, ...]]) -> Tuple[FrozenSet[int], List[str]]:
    state = _WORKER_STATE
    return _used(state["tt"], state["transfers"], state["engine"], state["max_transfers"], item[0], item[1])


def compute_fillin(
    tt: Timetable,
    transfers: Optional[TransferSet],
    workload: Workload,
    engine: str = "otm-rtbtr",
    max_transfers: int = MAX_TRANSFERS,
    workers: int = 1,
) -> FillInSet:
    """Union of trips on all Pareto-optimal journeys of the workload."""
    if engine not in FLAVORS:
        raise ValueError(f"unknown fill-in engine {engine!r}; expected one of {sorted(FLAVORS)}")
    if engine == "otm-rtbtr" and transfers is None:
        raise ValueError("otm-rtbtr needs a transfer set")
    started = time.perf_counter()
    used: set = set()
    warnings: List[str] = []
    if workers > 1 and len(workload.items) > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(tt, transfers, engine, max_transfers),
        ) as pool:
            for trips, messages in pool.map(_used_in_worker, workload.items):
                used |= trips
                warnings.extend(messages)
    else:
        for index in progress_steps("fillin_profiles", len(workload.items)):
            source, destinations = workload.items[index]
            trips, messages = _used(tt, transfers, engine, max_transfers, source, destinations)
            used |= trips
            warnings.extend(messages)

    routes = frozenset(tt.trips[t].route for t in used)
    flavor = FLAVORS[engine]
    trips = frozenset(used) if flavor == "tbtr" else frozenset()
    elapsed = time.perf_counter() - started
    stats: Dict[str, Any] = dict(workload.stats)
    stats.update({
        "engine": engine,
        "F-size": len(trips) if flavor == "tbtr" else len(routes),
        "F-size-percent": round(
            100.0 * (len(trips) / tt.n_trips if flavor == "tbtr" else len(routes) / tt.n_routes), 4,
        ) if tt.n_trips else 0.0,
        "F-time": round(elapsed, 6),
        "warnings": warnings,
    })
    logger.info(
        "fillin_done engine=%s pqueries=%d trips=%d routes=%d elapsed=%.3fs",
        engine, workload.pairs, len(trips), len(routes), elapsed,
    )
    return FillInSet(flavor=flavor, trips=trips, routes=routes, stats=stats)


# -- fill-in files ------------------------------------------------------------------

def save_fillin(fillin: FillInSet, path: Any, tt: Timetable) -> pathlib.Path:
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "flavor": fillin.flavor,
        "timetable": {"trips": tt.n_trips, "routes": tt.n_routes},
        "trips": sorted(fillin.trips),
        "routes": sorted(fillin.routes),
    }
    target.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    write_sidecar(target, {key: value for key, value in fillin.stats.items() if key != "warnings"})
    return target


def load_fillin(path: Any, tt: Optional[Timetable] = None) -> FillInSet:
    source = pathlib.Path(path)
    if not source.is_file():
        raise LayoutMismatchError(f"fill-in file not found: {source}")
    data = json.loads(source.read_text(encoding="utf-8"))
    if tt is not None:
        shape = data.get("timetable", {})
        if shape.get("trips") != tt.n_trips or shape.get("routes") != tt.n_routes:
            raise LayoutMismatchError(
                f"fill-in built for {shape.get('trips')} trips / {shape.get('routes')} routes, "
                f"timetable has {tt.n_trips} / {tt.n_routes}"
            )
    return FillInSet(
        flavor=data["flavor"],
        trips=frozenset(int(t) for t in data["trips"]),
        routes=frozenset(int(r) for r in data["routes"]),
    )
