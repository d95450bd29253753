# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Route hypergraph: one node per route or footpath, one hyperedge per shared stop.

Weighting schemes:
    sc1  every node and hyperedge weighs 1
    sc2  node = stop events of the route (0 for footpaths), edge = ln(1 + events at the stop)
    sc3  sc2 nodes, edge = ln(1 + events over the stop's walking neighborhood)

Hyperedges with identical pin sets are merged and their weights summed.
"""

import math
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import PartitionError
from .log_helpers import logger
from .timetable import Timetable

SCHEMES = ("sc1", "sc2", "sc3")


@dataclass
class Hypergraph:
    node_weights: np.ndarray
    edges: List[Tuple[int, ...]]
    edge_weights: np.ndarray
    node_labels: List[str] = field(default_factory=list)
    # Route index per node (-1 for footpath nodes) and footpath pair per node.
    node_routes: List[int] = field(default_factory=list)
    node_footpaths: List[Optional[Tuple[int, int]]] = field(default_factory=list)
    edge_stops: List[Tuple[int, ...]] = field(default_factory=list)
    scheme: str = "sc1"

    def __post_init__(self) -> None:
        self.node_weights = np.asarray(self.node_weights, dtype=np.float64)
        self.edge_weights = np.asarray(self.edge_weights, dtype=np.float64)
        n = self.node_weights.shape[0]
        if not self.node_labels:
            self.node_labels = [f"n{i}" for i in range(n)]
        if not self.node_routes:
            self.node_routes = [-1] * n
        if not self.node_footpaths:
            self.node_footpaths = [None] * n
        for pins in self.edges:
            if len(pins) < 2:
                raise PartitionError(f"hyperedge with fewer than 2 pins: {pins}")
            if min(pins) < 0 or max(pins) >= n:
                raise PartitionError(f"hyperedge pin out of range: {pins}")

    @property
    def n_nodes(self) -> int:
        return int(self.node_weights.shape[0])

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> List[List[int]]:
        """Edge ids per node."""
        result: List[List[int]] = [[] for _ in range(self.n_nodes)]
        for e, pins in enumerate(self.edges):
            for v in pins:
                result[v].append(e)
        return result

    def cut_weight(self, assignment: Sequence[int]) -> float:
        return float(sum(
            w for pins, w in zip(self.edges, self.edge_weights)
            if len({assignment[v] for v in pins}) > 1
        ))

    def induced(self, nodes: Sequence[int]) -> Tuple["Hypergraph", List[int]]:
        """Sub-hypergraph on `nodes`; edges keep pins inside, dropped below 2 pins."""
        keep = sorted(set(int(v) for v in nodes))
        local = {v: i for i, v in enumerate(keep)}
        merged: Dict[Tuple[int, ...], int] = {}
        edges: List[Tuple[int, ...]] = []
        weights: List[float] = []
        stops: List[Tuple[int, ...]] = []
        for e, pins in enumerate(self.edges):
            inside = tuple(local[v] for v in pins if v in local)
            if len(inside) < 2:
                continue
            slot = merged.get(inside)
            edge_stops = self.edge_stops[e] if self.edge_stops else ()
            if slot is None:
                merged[inside] = len(edges)
                edges.append(inside)
                weights.append(float(self.edge_weights[e]))
                stops.append(tuple(edge_stops))
            else:
                weights[slot] += float(self.edge_weights[e])
                stops[slot] = tuple(sorted(stops[slot] + tuple(edge_stops)))
        sub = Hypergraph(
            node_weights=self.node_weights[keep] if keep else np.zeros(0),
            edges=edges,
            edge_weights=np.asarray(weights, dtype=np.float64),
            node_labels=[self.node_labels[v] for v in keep],
            node_routes=[self.node_routes[v] for v in keep],
            node_footpaths=[self.node_footpaths[v] for v in keep],
            edge_stops=stops,
            scheme=self.scheme,
        )
        return sub, keep


def _stop_events(tt: Timetable) -> np.ndarray:
    events = np.zeros(tt.n_stops, dtype=np.int64)
    for route in tt.routes:
        for stop in route.stops:
            events[stop] += route.n_trips
    return events


def build_hypergraph(tt: Timetable, scheme: str = "sc1") -> Hypergraph:
    """Nodes ordered by route index, then footpath pairs (a < b) sorted."""
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise PartitionError(f"unknown weighting scheme {scheme!r}; expected one of {SCHEMES}")

    labels: List[str] = []
    node_routes: List[int] = []
    node_footpaths: List[Optional[Tuple[int, int]]] = []
    node_weights: List[float] = []
    incident: List[List[int]] = [[] for _ in range(tt.n_stops)]

    for route in tt.routes:
        node = len(labels)
        labels.append(f"route:{route.route_id}")
        node_routes.append(route.route_id)
        node_footpaths.append(None)
        node_weights.append(1.0 if scheme == "sc1" else float(route.n_trips * len(route)))
        for stop in dict.fromkeys(route.stops):
            incident[stop].append(node)
    for a, b, _ in tt.footpaths.pairs():
        node = len(labels)
        labels.append(f"footpath:{tt.stop_ids[a]}-{tt.stop_ids[b]}")
        node_routes.append(-1)
        node_footpaths.append((a, b))
        node_weights.append(1.0 if scheme == "sc1" else 0.0)
        incident[a].append(node)
        incident[b].append(node)

    events = _stop_events(tt)
    merged: Dict[Tuple[int, ...], int] = {}
    edges: List[Tuple[int, ...]] = []
    weights: List[float] = []
    stops: List[Tuple[int, ...]] = []
    for stop in range(tt.n_stops):
        pins = tuple(sorted(set(incident[stop])))
        if len(pins) < 2:
            continue
        if scheme == "sc1":
            weight = 1.0
        elif scheme == "sc2":
            weight = math.log1p(int(events[stop]))
        else:
            weight = math.log1p(int(sum(events[s] for s, _ in tt.walks_from(stop))))
        slot = merged.get(pins)
        if slot is None:
            merged[pins] = len(edges)
            edges.append(pins)
            weights.append(weight)
            stops.append((stop,))
        else:
            weights[slot] += weight
            stops[slot] = stops[slot] + (stop,)

    hg = Hypergraph(
        node_weights=np.asarray(node_weights, dtype=np.float64),
        edges=edges,
        edge_weights=np.asarray(weights, dtype=np.float64),
        node_labels=labels,
        node_routes=node_routes,
        node_footpaths=node_footpaths,
        edge_stops=stops,
        scheme=scheme,
    )
    logger.info(
        "hypergraph_built scheme=%s nodes=%d edges=%d merged=%d",
        scheme, hg.n_nodes, hg.n_edges, sum(len(s) for s in stops) - len(stops),
    )
    return hg


# -- hMETIS files --------------------------------------------------------------

def _integer_weights(values: np.ndarray) -> List[int]:
    """Positive integers; non-integral weights are scaled by 100 first."""
    if values.size and not np.allclose(values, np.round(values)):
        values = values * 100.0
    return [max(1, int(round(float(v)))) for v in values]


def export_hmetis(hg: Hypergraph, path: Any) -> pathlib.Path:
    """Write the hypergraph with edge and node weights (fmt 11), pins 1-based."""
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{hg.n_edges} {hg.n_nodes} 11"]
    for pins, weight in zip(hg.edges, _integer_weights(hg.edge_weights)):
        lines.append(" ".join([str(weight)] + [str(v + 1) for v in pins]))
    lines.extend(str(w) for w in _integer_weights(hg.node_weights))
    target.write_text("\n".join(lines) + "\n", encoding="ascii")
    logger.info("hmetis_exported path=%s nodes=%d edges=%d", target, hg.n_nodes, hg.n_edges)
    return target


def _data_lines(text: str) -> List[List[str]]:
    return [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("%")]


def read_hmetis(path: Any) -> Hypergraph:
    """Parse an hMETIS hypergraph file with fmt 0, 1, 10 or 11."""
    source = pathlib.Path(path)
    rows = _data_lines(source.read_text(encoding="ascii"))
    if not rows:
        raise PartitionError(f"empty hMETIS file: {source}")
    header = rows[0]
    try:
        n_edges, n_nodes = int(header[0]), int(header[1])
        fmt = int(header[2]) if len(header) > 2 else 0
    except (IndexError, ValueError) as exc:
        raise PartitionError(f"bad hMETIS header in {source}: {' '.join(header)}") from exc
    if fmt not in (0, 1, 10, 11):
        raise PartitionError(f"unsupported hMETIS fmt code {fmt}")
    edge_weighted, node_weighted = fmt in (1, 11), fmt in (10, 11)
    expected = 1 + n_edges + (n_nodes if node_weighted else 0)
    if len(rows) < expected:
        raise PartitionError(f"truncated hMETIS file {source}: {len(rows)} of {expected} lines")

    edges: List[Tuple[int, ...]] = []
    weights: List[float] = []
    for line_no, row in enumerate(rows[1:1 + n_edges], start=2):
        values = [int(x) for x in row]
        weight = float(values[0]) if edge_weighted else 1.0
        pins = values[1:] if edge_weighted else values
        if any(v < 1 or v > n_nodes for v in pins):
            raise PartitionError(f"pin index out of range on line {line_no} of {source}")
        edges.append(tuple(sorted(set(v - 1 for v in pins))))
        weights.append(weight)
    if node_weighted:
        node_weights = [float(row[0]) for row in rows[1 + n_edges:1 + n_edges + n_nodes]]
    else:
        node_weights = [1.0] * n_nodes
    return Hypergraph(
        node_weights=np.asarray(node_weights, dtype=np.float64),
        edges=edges,
        edge_weights=np.asarray(weights, dtype=np.float64),
    )


def import_partition(path: Any, n_nodes: Optional[int] = None) -> List[int]:
    """Read one cell label per line, as written by external hypergraph partitioners."""
    source = pathlib.Path(path)
    labels = [int(row[0]) for row in _data_lines(source.read_text(encoding="ascii"))]
    if n_nodes is not None and len(labels) != n_nodes:
        raise PartitionError(f"partition file has {len(labels)} labels, hypergraph has {n_nodes} nodes")
    if labels and min(labels) < 0:
        raise PartitionError("partition labels must be non-negative")
    return labels
