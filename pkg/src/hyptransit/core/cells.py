# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Route cells, stop cells and cutstops, flat or nested one level deep.

Cells are numbered 1..p; stop cell 0 holds the cutstops. A stop is a cutstop
when two of its incident nodes (routes or footpaths) lie in different cells.
"""

import json
import pathlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import LayoutMismatchError, PartitionError
from .hypergraph import Hypergraph
from .log_helpers import logger
from .partitioner import partition_multilevel
from .settings import PARTITION_EPSILON
from .timetable import Timetable


@dataclass
class PartitionLayout:
    p: int
    route_cell: np.ndarray  # route -> 1..p
    stop_cell: np.ndarray  # stop -> 0..p
    footpath_cells: Dict[Tuple[int, int], int] = field(default_factory=dict)

    @property
    def n_stops(self) -> int:
        return int(self.stop_cell.shape[0])

    @property
    def n_routes(self) -> int:
        return int(self.route_cell.shape[0])

    def routes_in(self, cell: int) -> FrozenSet[int]:
        return frozenset(np.flatnonzero(self.route_cell == cell).tolist())

    def stops_in(self, cell: int) -> FrozenSet[int]:
        return frozenset(np.flatnonzero(self.stop_cell == cell).tolist())

    @property
    def route_cells(self) -> List[FrozenSet[int]]:
        """R_1..R_p."""
        return [self.routes_in(c) for c in range(1, self.p + 1)]

    @property
    def stop_cells(self) -> List[FrozenSet[int]]:
        """S_0..S_p."""
        return [self.stops_in(c) for c in range(self.p + 1)]

    @property
    def cutstops(self) -> FrozenSet[int]:
        return self.stops_in(0)

    def scut(self) -> Dict[str, float]:
        count = len(self.cutstops)
        return {"count": count, "percent": round(100.0 * count / self.n_stops, 4) if self.n_stops else 0.0}

    def check_timetable(self, tt: Timetable) -> None:
        if self.n_stops != tt.n_stops or self.n_routes != tt.n_routes:
            raise LayoutMismatchError(
                f"layout covers {self.n_stops} stops / {self.n_routes} routes, "
                f"timetable has {tt.n_stops} / {tt.n_routes}"
            )


@dataclass
class NestedLayout:
    """Parent cells 1..P; each parent split into its own child layout (cells 1..p_P)."""

    top: PartitionLayout
    children: Dict[int, PartitionLayout]
    # Stops incident to any route or footpath of each parent.
    universes: Dict[int, FrozenSet[int]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def n_stops(self) -> int:
        return self.top.n_stops

    def level1_cutstops(self) -> FrozenSet[int]:
        return self.top.cutstops

    def level1_of(self, parent: int) -> FrozenSet[int]:
        return self.universes.get(parent, frozenset()) & self.top.cutstops

    def level2_cutstops(self, parent: int) -> FrozenSet[int]:
        child = self.children.get(parent)
        if child is None:
            return frozenset()
        universe = self.universes.get(parent)
        inside = child.cutstops if universe is None else child.cutstops & universe
        return inside - self.top.cutstops

    def leaf_cells(self) -> List[Tuple[int, int]]:
        """(parent, child) pairs in order; flattened cell k+1 is the k-th entry."""
        return [(parent, child) for parent in range(1, self.top.p + 1) for child in range(1, self.children[parent].p + 1)]

    def flatten(self) -> PartitionLayout:
        """Leaf layout: every child cell becomes a cell of one flat layout."""
        numbering = {leaf: k + 1 for k, leaf in enumerate(self.leaf_cells())}
        route_cell = np.zeros_like(self.top.route_cell)
        for route, parent in enumerate(self.top.route_cell.tolist()):
            route_cell[route] = numbering[(parent, int(self.children[parent].route_cell[route]))]
        stop_cell = np.zeros_like(self.top.stop_cell)
        for stop, parent in enumerate(self.top.stop_cell.tolist()):
            if parent == 0:
                continue
            child = int(self.children[parent].stop_cell[stop])
            stop_cell[stop] = 0 if child == 0 else numbering[(parent, child)]
        footpaths = {
            pair: numbering[(parent, self.children[parent].footpath_cells.get(pair, 1))]
            for pair, parent in self.top.footpath_cells.items()
        }
        return PartitionLayout(len(numbering), route_cell, stop_cell, footpaths)

    def scut(self) -> Dict[str, Any]:
        level2 = sum(len(self.level2_cutstops(parent)) for parent in self.children)
        return {"level1": self.top.scut(), "level2": level2}


def _footpath_cell(tt: Timetable, route_cell: np.ndarray, a: int, b: int) -> int:
    tally = Counter(int(route_cell[r]) for stop in (a, b) for r, _ in tt.stop_routes[stop])
    if not tally:
        return 1
    top = max(tally.values())
    return min(c for c, n in tally.items() if n == top)


def derive_cells(
    tt: Timetable,
    route_assignment: Sequence[int],
    footpath_cells: Optional[Mapping[Tuple[int, int], int]] = None,
    p: Optional[int] = None,
) -> PartitionLayout:
    """Stop cells from route cells (1..p).

    Footpaths without an explicit cell join the cell most common among routes
    through their two stops (ties to the lowest cell).
    """
    route_cell = np.asarray(route_assignment, dtype=np.int64)
    if route_cell.shape[0] != tt.n_routes:
        raise LayoutMismatchError(f"{route_cell.shape[0]} route cells for {tt.n_routes} routes")
    if p is None:
        p = int(route_cell.max()) if route_cell.size else 1
    if route_cell.size and (route_cell.min() < 1 or route_cell.max() > p):
        raise PartitionError("route cells must be numbered 1..p")

    footpaths: Dict[Tuple[int, int], int] = {}
    for a, b, _ in tt.footpaths.pairs():
        if footpath_cells is not None and (a, b) in footpath_cells:
            footpaths[(a, b)] = int(footpath_cells[(a, b)])
        else:
            footpaths[(a, b)] = _footpath_cell(tt, route_cell, a, b)

    incident: List[set] = [set() for _ in range(tt.n_stops)]
    for route in tt.routes:
        for stop in route.stops:
            incident[stop].add(int(route_cell[route.route_id]))
    for (a, b), cell in footpaths.items():
        incident[a].add(cell)
        incident[b].add(cell)

    stop_cell = np.zeros(tt.n_stops, dtype=np.int64)
    for stop in range(tt.n_stops):
        cells = incident[stop]
        stop_cell[stop] = next(iter(cells)) if len(cells) == 1 else 0
    layout = PartitionLayout(p, route_cell, stop_cell, footpaths)
    logger.debug("cells_derived p=%d cutstops=%d", p, len(layout.cutstops))
    return layout


def layout_from_assignment(tt: Timetable, hg: Hypergraph, assignment: Sequence[int], p: int) -> PartitionLayout:
    """Translate a node assignment (0..p-1) of `build_hypergraph(tt)` into a layout."""
    if len(assignment) != hg.n_nodes:
        raise LayoutMismatchError(f"{len(assignment)} labels for {hg.n_nodes} hypergraph nodes")
    route_cell = np.zeros(tt.n_routes, dtype=np.int64)
    footpaths: Dict[Tuple[int, int], int] = {}
    for node, cell in enumerate(assignment):
        if int(cell) < 0 or int(cell) >= p:
            raise PartitionError(f"node {hg.node_labels[node]} has cell label {cell} outside 0..{p - 1}")
        route = hg.node_routes[node]
        if route >= 0:
            route_cell[route] = int(cell) + 1
        elif hg.node_footpaths[node] is not None:
            footpaths[hg.node_footpaths[node]] = int(cell) + 1
    if np.any(route_cell == 0):
        raise LayoutMismatchError("hypergraph does not cover every route of the timetable")
    return derive_cells(tt, route_cell, footpaths, p=p)


def partition_timetable(
    tt: Timetable, hg: Hypergraph, p: int, epsilon: float = PARTITION_EPSILON, seed: int = 0,
) -> PartitionLayout:
    result = partition_multilevel(hg, p, epsilon, seed)
    return layout_from_assignment(tt, hg, result.assignment.tolist(), p)


def _child_seed(seed: int, parent: int) -> int:
    return int(np.random.SeedSequence([seed, parent]).generate_state(1)[0])


def nested_partition(
    hg: Hypergraph,
    tt: Timetable,
    top_p: int,
    child_p: int,
    epsilon: float = PARTITION_EPSILON,
    seed: int = 0,
) -> NestedLayout:
    """Partition into `top_p` parents, then split each parent's induced sub-hypergraph."""
    if top_p < 2 or child_p < 1:
        raise PartitionError("nested partitioning needs top_p >= 2 and child_p >= 1")
    top_result = partition_multilevel(hg, top_p, epsilon, seed)
    top = layout_from_assignment(tt, hg, top_result.assignment.tolist(), top_p)

    children: Dict[int, PartitionLayout] = {}
    universes: Dict[int, FrozenSet[int]] = {}
    warnings: List[str] = []
    for parent in range(1, top_p + 1):
        nodes = np.flatnonzero(top_result.assignment == parent - 1).tolist()
        sub, keep = hg.induced(nodes)
        routes = [hg.node_routes[v] for v in keep if hg.node_routes[v] >= 0]
        universe = sorted(
            {s for r in routes for s in tt.routes[r].stops}
            | {s for v in keep if hg.node_footpaths[v] is not None for s in hg.node_footpaths[v]}
        )
        universes[parent] = frozenset(universe)
        local = [0] * len(keep)
        child_cells = 1
        if child_p > 1:
            try:
                result = partition_multilevel(sub, child_p, epsilon, _child_seed(seed, parent))
                local = result.assignment.tolist()
                child_cells = child_p
            except PartitionError as exc:
                message = f"parent_unsplit parent={parent} nodes={sub.n_nodes} reason={exc}"
                logger.warning(message)
                warnings.append(message)
        # Routes outside this parent get cell 1; only the parent's stop universe is classified.
        route_cell = np.ones(tt.n_routes, dtype=np.int64)
        footpaths: Dict[Tuple[int, int], int] = {}
        for position, node in enumerate(keep):
            if hg.node_routes[node] >= 0:
                route_cell[hg.node_routes[node]] = local[position] + 1
            elif hg.node_footpaths[node] is not None:
                footpaths[hg.node_footpaths[node]] = local[position] + 1
        children[parent] = _restricted_cells(tt, route_cell, footpaths, child_cells, set(routes), universe)
    return NestedLayout(top=top, children=children, universes=universes, warnings=warnings)


def nested_from_routes(tt: Timetable, parents: Sequence[int], children: Sequence[int]) -> NestedLayout:
    """Nested layout from per-route parent cells (1..P) and child cells within each parent."""
    parent_cell = np.asarray(parents, dtype=np.int64)
    child_cell = np.asarray(children, dtype=np.int64)
    if child_cell.shape != (tt.n_routes,):
        raise LayoutMismatchError(f"child assignment covers {child_cell.size} routes, timetable has {tt.n_routes}")
    if tt.n_routes and int(child_cell.min()) < 1:
        raise PartitionError("child cells must be numbered 1..p")
    top = derive_cells(tt, parent_cell)
    layouts: Dict[int, PartitionLayout] = {}
    universes: Dict[int, FrozenSet[int]] = {}
    for parent in range(1, top.p + 1):
        routes = set(np.flatnonzero(parent_cell == parent).tolist())
        route_cell = np.ones(tt.n_routes, dtype=np.int64)
        for route_id in routes:
            route_cell[route_id] = child_cell[route_id]
        footpaths: Dict[Tuple[int, int], int] = {}
        for (a, b), cell in top.footpath_cells.items():
            if cell != parent:
                continue
            tally = Counter(
                int(route_cell[r]) for stop in (a, b) for r, _ in tt.stop_routes[stop] if r in routes
            )
            footpaths[(a, b)] = min(tally.items(), key=lambda item: (-item[1], item[0]))[0] if tally else 1
        universe = sorted(
            {s for r in routes for s in tt.routes[r].stops} | {s for pair in footpaths for s in pair}
        )
        universes[parent] = frozenset(universe)
        p = max((int(child_cell[r]) for r in routes), default=1)
        layouts[parent] = _restricted_cells(tt, route_cell, footpaths, p, routes, universe)
    return NestedLayout(top=top, children=layouts, universes=universes)


def _restricted_cells(
    tt: Timetable,
    route_cell: np.ndarray,
    footpaths: Dict[Tuple[int, int], int],
    p: int,
    routes: set,
    universe: Sequence[int],
) -> PartitionLayout:
    """Child layout where only the parent's routes and footpaths count toward stop cells."""
    incident: Dict[int, set] = {stop: set() for stop in universe}
    for route_id in routes:
        for stop in tt.routes[route_id].stops:
            incident[stop].add(int(route_cell[route_id]))
    for (a, b), cell in footpaths.items():
        for stop in (a, b):
            if stop in incident:
                incident[stop].add(cell)
    stop_cell = np.zeros(tt.n_stops, dtype=np.int64)
    for stop, cells in incident.items():
        stop_cell[stop] = next(iter(cells)) if len(cells) == 1 else 0
    return PartitionLayout(p, route_cell, stop_cell, footpaths)


def parse_partitions(spec: Any) -> Tuple[int, Optional[int]]:
    """`"6"` -> (6, None); `"3x2"` -> (3, 2)."""
    text = str(spec).strip().lower()
    parts = text.split("x")
    try:
        values = [int(part) for part in parts]
    except ValueError:
        raise PartitionError(f"partition spec {spec!r} is neither P nor AxB") from None
    if len(values) == 1 and values[0] >= 1:
        return values[0], None
    if len(values) == 2 and values[0] >= 2 and values[1] >= 1:
        return values[0], values[1]
    raise PartitionError(f"partition spec {spec!r} is neither P >= 1 nor AxB with A >= 2, B >= 1")


def build_layout(
    tt: Timetable, hg: Hypergraph, spec: Any, epsilon: float = PARTITION_EPSILON, seed: int = 0,
) -> Any:
    """Standard layout for `P`, nested layout for `AxB`."""
    top_p, child_p = parse_partitions(spec)
    if child_p is None:
        return partition_timetable(tt, hg, top_p, epsilon, seed)
    return nested_partition(hg, tt, top_p, child_p, epsilon, seed)


# -- layout JSON ----------------------------------------------------------------

def _layout_dict(layout: PartitionLayout) -> Dict[str, Any]:
    return {
        "p": layout.p,
        "route_cell": layout.route_cell.tolist(),
        "stop_cell": layout.stop_cell.tolist(),
        "footpath_cells": [[a, b, c] for (a, b), c in sorted(layout.footpath_cells.items())],
    }


def _layout_from_dict(data: Mapping[str, Any]) -> PartitionLayout:
    return PartitionLayout(
        p=int(data["p"]),
        route_cell=np.asarray(data["route_cell"], dtype=np.int64),
        stop_cell=np.asarray(data["stop_cell"], dtype=np.int64),
        footpath_cells={(int(a), int(b)): int(c) for a, b, c in data.get("footpath_cells", [])},
    )


def layout_to_json(layout: Any, tt: Optional[Timetable] = None) -> Dict[str, Any]:
    if isinstance(layout, NestedLayout):
        payload: Dict[str, Any] = {
            "kind": "nested",
            "top": _layout_dict(layout.top),
            "children": {str(parent): _layout_dict(child) for parent, child in sorted(layout.children.items())},
            "universes": {str(parent): sorted(stops) for parent, stops in sorted(layout.universes.items())},
            "scut": layout.scut(),
        }
        flat_cutstops = layout.flatten().cutstops
    else:
        payload = {"kind": "standard", **_layout_dict(layout), "scut": layout.scut()}
        flat_cutstops = layout.cutstops
    if tt is not None:
        payload["cutstops"] = [tt.stop_ids[s] for s in sorted(flat_cutstops)]
    return payload


def layout_from_json(data: Mapping[str, Any]) -> Any:
    kind = data.get("kind", "standard")
    if kind == "nested":
        return NestedLayout(
            top=_layout_from_dict(data["top"]),
            children={int(parent): _layout_from_dict(child) for parent, child in data["children"].items()},
            universes={int(parent): frozenset(stops) for parent, stops in data.get("universes", {}).items()},
        )
    if kind != "standard":
        raise LayoutMismatchError(f"unknown layout kind {kind!r}")
    return _layout_from_dict(data)


def save_layout(layout: Any, path: Any, tt: Optional[Timetable] = None) -> pathlib.Path:
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(layout_to_json(layout, tt), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def load_layout(path: Any, tt: Optional[Timetable] = None) -> Any:
    source = pathlib.Path(path)
    if not source.is_file():
        raise LayoutMismatchError(f"layout file not found: {source}")
    layout = layout_from_json(json.loads(source.read_text(encoding="utf-8")))
    if tt is not None:
        (layout.top if isinstance(layout, NestedLayout) else layout).check_timetable(tt)
    return layout
