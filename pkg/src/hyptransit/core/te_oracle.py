# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Layered time-expanded graph and Dijkstra ground truth for small instances.

Each layer n holds one copy of the event graph: arrival nodes A(t, i),
departure nodes D(t, i) and one waiting chain per stop W(s, d) over the
distinct departure times at that stop. Riding and staying seated stay inside a
layer; alighting (plus any footpath, including the zero walk to the same stop)
moves to the next layer, so reaching a target node in layer n means exactly n
transfers. Edge weights are elapsed seconds.
"""

import time
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Tuple

import networkx as nx
import numpy as np

from .log_helpers import logger
from .pareto import INF, ParetoSet, pareto_filter
from .settings import MAX_TRANSFERS, QUERY_HORIZON_S
from .timetable import Timetable

SOURCE = ("S",)


@dataclass
class TEGraph:
    graph: nx.DiGraph
    layers: int
    layered: bool
    wait_times: Dict[int, np.ndarray]

    @property
    def max_transfers(self) -> int:
        return self.layers - 1

    def first_wait(self, stop: int, time_at_stop: int, layer: int) -> Optional[Tuple[Hashable, int]]:
        """Waiting node of the first departure at `stop` not before `time_at_stop`."""
        times = self.wait_times.get(stop)
        if times is None:
            return None
        position = int(np.searchsorted(times, time_at_stop, side="left"))
        if position >= times.shape[0]:
            return None
        departure = int(times[position])
        return ("W", stop, departure, layer), departure - time_at_stop


def build_te_graph(tt: Timetable, max_transfers: int = MAX_TRANSFERS, layered: bool = True) -> TEGraph:
    """Build λ+1 layers (or a single unlayered copy when `layered` is False)."""
    if max_transfers < 0:
        raise ValueError("max_transfers must be >= 0")
    started = time.perf_counter()
    layers = max_transfers + 1 if layered else 1

    departures_at: Dict[int, set] = {}
    for trip in tt.trips:
        for i in range(len(trip) - 1):
            departures_at.setdefault(trip.stops[i], set()).add(trip.dep[i])
    wait_times = {stop: np.asarray(sorted(times), dtype=np.int64) for stop, times in departures_at.items()}

    te = TEGraph(graph=nx.DiGraph(), layers=layers, layered=layered, wait_times=wait_times)
    graph = te.graph
    edges: List[Tuple[Hashable, Hashable, int]] = []
    for n in range(layers):
        for trip in tt.trips:
            t = trip.trip_id
            graph.add_nodes_from(("A", t, i, n) for i in range(len(trip)))
            graph.add_nodes_from(("D", t, i, n) for i in range(len(trip)))
            for i in range(len(trip)):
                edges.append((("A", t, i, n), ("D", t, i, n), trip.dep[i] - trip.arr[i]))
                if i + 1 < len(trip):
                    edges.append((("D", t, i, n), ("A", t, i + 1, n), trip.arr[i + 1] - trip.dep[i]))
                    edges.append((("W", trip.stops[i], trip.dep[i], n), ("D", t, i, n), 0))
        for stop, times in wait_times.items():
            chain = times.tolist()
            graph.add_nodes_from(("W", stop, d, n) for d in chain)
            for a, b in zip(chain, chain[1:]):
                edges.append((("W", stop, a, n), ("W", stop, b, n), b - a))

    # Alighting moves to layer n + 1; the unlayered graph loops back into its only layer.
    for n in range(layers):
        next_layer = n + 1 if layered else 0
        if next_layer >= layers and layered:
            break
        for trip in tt.trips:
            for i in range(1, len(trip)):
                for stop, walk in tt.walks_from(trip.stops[i]):
                    hit = te.first_wait(stop, trip.arr[i] + walk, next_layer)
                    if hit is not None:
                        node, wait = hit
                        edges.append((("A", trip.trip_id, i, n), node, walk + wait))

    graph.add_weighted_edges_from(edges)
    logger.debug(
        "te_graph_built layers=%d nodes=%d edges=%d elapsed=%.3fs",
        layers, graph.number_of_nodes(), graph.number_of_edges(), time.perf_counter() - started,
    )
    return te


def expected_node_count(tt: Timetable, layers: int) -> int:
    """(layers) x (2 x stop events + waiting nodes)."""
    waits = len({(trip.stops[i], trip.dep[i]) for trip in tt.trips for i in range(len(trip) - 1)})
    return layers * (2 * tt.stop_events + waits)


def _query_distances(
    te: TEGraph, tt: Timetable, origin: int, target: int, departure: int, horizon: int,
) -> Dict[Hashable, int]:
    graph = te.graph.copy()
    for stop, walk in tt.walks_from(origin):
        hit = te.first_wait(stop, departure + walk, 0)
        if hit is not None:
            node, wait = hit
            graph.add_edge(SOURCE, node, weight=walk + wait)
    graph.add_node(SOURCE)

    walks_to_target = {stop: walk for stop, walk in tt.walks_from(target)}
    for n in range(te.layers):
        graph.add_node(("T", n))
    for trip in tt.trips:
        for i in range(1, len(trip)):
            walk = walks_to_target.get(trip.stops[i])
            if walk is None:
                continue
            for n in range(te.layers):
                graph.add_edge(("A", trip.trip_id, i, n), ("T", n), weight=walk)
    direct = walks_to_target.get(origin)
    if direct is not None:
        graph.add_edge(SOURCE, ("T", 0), weight=direct)
    return nx.single_source_dijkstra_path_length(graph, SOURCE, cutoff=horizon, weight="weight")


def oracle_pareto(
    tt: Timetable,
    origin: int,
    target: int,
    departure: int,
    max_transfers: int = MAX_TRANSFERS,
    te: Optional[TEGraph] = None,
    horizon: int = QUERY_HORIZON_S,
) -> ParetoSet:
    """Exact (arrival, transfers) Pareto set by Dijkstra on the layered graph."""
    origin, target = tt.check_stop(origin), tt.check_stop(target)
    if te is None or not te.layered or te.max_transfers < max_transfers:
        te = build_te_graph(tt, max_transfers)
    distances = _query_distances(te, tt, origin, target, departure, horizon)
    points = [
        (departure + distances[("T", n)], n)
        for n in range(max_transfers + 1)
        if ("T", n) in distances
    ]
    return pareto_filter(points)


def oracle_earliest_arrival(
    tt: Timetable,
    origin: int,
    target: int,
    departure: int,
    te: Optional[TEGraph] = None,
    horizon: int = QUERY_HORIZON_S,
) -> int:
    """Earliest arrival ignoring transfer counts (single unlayered copy); INF if unreachable."""
    origin, target = tt.check_stop(origin), tt.check_stop(target)
    if te is None or te.layered:
        te = build_te_graph(tt, 0, layered=False)
    distances = _query_distances(te, tt, origin, target, departure, horizon)
    reached = distances.get(("T", 0))
    return INF if reached is None else departure + int(reached)
