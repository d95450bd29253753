# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Hypergraph partitioning under the balance bound (1 + epsilon) * ceil(W / p).

`partition_multilevel` coarsens by heavy-edge matching, grows an initial
partition greedily from several seeds, and refines with k-way FM passes at
every level while uncoarsening. `partition_exact` is a branch-and-bound
search maximizing the weight of uncut hyperedges, for tiny instances only.
"""

import heapq
import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InfeasiblePartitionError, PartitionError
from .hypergraph import Hypergraph
from .log_helpers import logger
from .settings import EXACT_PARTITION_MAX_NODES, FM_PASS_LIMIT, PARTITION_EPSILON

_TOLERANCE = 1e-9
# Hyperedges larger than this are ignored when rating matches.
_MATCH_EDGE_LIMIT = 64


@dataclass
class Partition:
    assignment: np.ndarray
    p: int
    cut: float
    objective: float
    cell_weights: np.ndarray
    bound: Optional[float] = None

    def cells(self) -> List[List[int]]:
        return [np.flatnonzero(self.assignment == c).tolist() for c in range(self.p)]

    def to_dict(self) -> Dict[str, object]:
        return {
            "p": self.p,
            "cut": self.cut,
            "objective": self.objective,
            "cell_weights": self.cell_weights.tolist(),
            "bound": self.bound,
        }


def balance_bound(total_weight: float, p: int, epsilon: float) -> float:
    return (1.0 + epsilon) * math.ceil(total_weight / p)


def _check_request(hg: Hypergraph, p: int, epsilon: float) -> float:
    if p < 1:
        raise PartitionError("p must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise PartitionError("epsilon must lie in (0, 1)")
    if p > hg.n_nodes:
        raise PartitionError(f"cannot split {hg.n_nodes} nodes into {p} non-empty cells")
    bound = balance_bound(float(hg.node_weights.sum()), p, epsilon)
    heaviest = int(np.argmax(hg.node_weights))
    if hg.node_weights[heaviest] > bound + _TOLERANCE:
        raise InfeasiblePartitionError(
            f"node {hg.node_labels[heaviest]} weighs {hg.node_weights[heaviest]:g}, "
            f"above the cell bound {bound:g}"
        )
    return bound


def _result(hg: Hypergraph, assignment: Sequence[int], p: int, bound: Optional[float]) -> Partition:
    assignment = np.asarray(assignment, dtype=np.int64)
    cut = hg.cut_weight(assignment)
    weights = np.bincount(assignment, weights=hg.node_weights, minlength=p) if hg.n_nodes else np.zeros(p)
    return Partition(
        assignment=assignment,
        p=p,
        cut=cut,
        objective=float(hg.edge_weights.sum()) - cut,
        cell_weights=weights,
        bound=bound,
    )


class _RefineState:
    """Assignment plus per-edge pin counts per cell."""

    def __init__(self, hg: Hypergraph, p: int, bound: float, assignment: Sequence[int]):
        self.hg = hg
        self.p = p
        self.bound = bound
        self.assign = [int(c) for c in assignment]
        self.incidence = hg.incidence()
        self.sizes = [len(pins) for pins in hg.edges]
        self.edge_weights = hg.edge_weights.tolist()
        self.node_weights = hg.node_weights.tolist()
        self.counts = np.zeros((hg.n_edges, p), dtype=np.int64)
        for e, pins in enumerate(hg.edges):
            for v in pins:
                self.counts[e, self.assign[v]] += 1
        self.cell_weight = [0.0] * p
        self.cell_size = [0] * p
        for v, c in enumerate(self.assign):
            self.cell_weight[c] += self.node_weights[v]
            self.cell_size[c] += 1

    def move(self, v: int, target: int) -> None:
        source = self.assign[v]
        for e in self.incidence[v]:
            self.counts[e, source] -= 1
            self.counts[e, target] += 1
        self.cell_weight[source] -= self.node_weights[v]
        self.cell_weight[target] += self.node_weights[v]
        self.cell_size[source] -= 1
        self.cell_size[target] += 1
        self.assign[v] = target

    def gain(self, v: int, target: int) -> float:
        source = self.assign[v]
        value = 0.0
        for e in self.incidence[v]:
            size = self.sizes[e]
            if self.counts[e, source] == size:
                value -= self.edge_weights[e]
            elif self.counts[e, target] == size - 1:
                value += self.edge_weights[e]
        return round(value, 9)

    def fits(self, v: int, target: int) -> bool:
        return self.cell_weight[target] + self.node_weights[v] <= self.bound + _TOLERANCE

    def best_move(self, v: int) -> Optional[Tuple[float, int]]:
        source = self.assign[v]
        if self.cell_size[source] <= 1:
            return None
        best: Optional[Tuple[float, int]] = None
        for target in range(self.p):
            if target == source or not self.fits(v, target):
                continue
            value = self.gain(v, target)
            if best is None or value > best[0]:
                best = (value, target)
        return best

    def cut(self) -> float:
        return float(sum(
            w for e, w in enumerate(self.edge_weights) if self.counts[e].max() < self.sizes[e]
        ))

    def repair(self) -> bool:
        """Move nodes until no cell is overweight or empty."""
        n = len(self.assign)
        for _ in range(4 * n + self.p):
            empty = [c for c in range(self.p) if self.cell_size[c] == 0]
            over = [c for c in range(self.p) if self.cell_weight[c] > self.bound + _TOLERANCE]
            if not empty and not over:
                return True
            options: List[Tuple[float, int, int]] = []
            if empty:
                target = empty[0]
                for v in range(n):
                    if self.cell_size[self.assign[v]] > 1 and self.fits(v, target):
                        options.append((-self.gain(v, target), v, target))
            else:
                source = over[0]
                for v in range(n):
                    if self.assign[v] != source or self.node_weights[v] <= 0:
                        continue
                    for target in range(self.p):
                        if target != source and self.fits(v, target):
                            options.append((-self.gain(v, target), v, target))
            if not options:
                return False
            _, v, target = min(options)
            self.move(v, target)
        return False

    def fm_pass(self) -> float:
        """One FM pass with locked nodes; rolls back to the best prefix."""
        heap: List[Tuple[float, int, int]] = []
        for v in range(len(self.assign)):
            move = self.best_move(v)
            if move is not None:
                heapq.heappush(heap, (-move[0], v, move[1]))
        locked = [False] * len(self.assign)
        history: List[Tuple[int, int]] = []
        total = best = 0.0
        best_length = 0
        while heap:
            negative, v, target = heapq.heappop(heap)
            if locked[v]:
                continue
            move = self.best_move(v)
            if move is None:
                continue
            if move != (-negative, target):
                heapq.heappush(heap, (-move[0], v, move[1]))
                continue
            history.append((v, self.assign[v]))
            self.move(v, target)
            locked[v] = True
            total += move[0]
            if total > best + _TOLERANCE:
                best, best_length = total, len(history)
            neighbors = {u for e in self.incidence[v] for u in self.hg.edges[e] if not locked[u]}
            for u in sorted(neighbors):
                update = self.best_move(u)
                if update is not None:
                    heapq.heappush(heap, (-update[0], u, update[1]))
        for v, source in reversed(history[best_length:]):
            self.move(v, source)
        return best

    def refine(self, pass_limit: int = FM_PASS_LIMIT) -> int:
        for passes in range(1, pass_limit + 1):
            if self.fm_pass() <= _TOLERANCE:
                return passes
        return pass_limit


def _contract(hg: Hypergraph, mapping: np.ndarray, n_clusters: int) -> Hypergraph:
    weights = np.zeros(n_clusters, dtype=np.float64)
    np.add.at(weights, mapping, hg.node_weights)
    merged: Dict[Tuple[int, ...], int] = {}
    edges: List[Tuple[int, ...]] = []
    edge_weights: List[float] = []
    for pins, w in zip(hg.edges, hg.edge_weights.tolist()):
        coarse = tuple(sorted({int(mapping[v]) for v in pins}))
        if len(coarse) < 2:
            continue
        slot = merged.get(coarse)
        if slot is None:
            merged[coarse] = len(edges)
            edges.append(coarse)
            edge_weights.append(w)
        else:
            edge_weights[slot] += w
    return Hypergraph(node_weights=weights, edges=edges, edge_weights=np.asarray(edge_weights))


def _match(hg: Hypergraph, bound: float, rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """Heavy-edge matching; returns node -> cluster and the cluster count."""
    incidence = hg.incidence()
    partner = np.full(hg.n_nodes, -1, dtype=np.int64)
    weights = hg.node_weights
    for u in rng.permutation(hg.n_nodes).tolist():
        if partner[u] >= 0:
            continue
        rating: Dict[int, float] = {}
        for e in incidence[u]:
            pins = hg.edges[e]
            if len(pins) > _MATCH_EDGE_LIMIT:
                continue
            share = float(hg.edge_weights[e]) / (len(pins) - 1)
            for v in pins:
                if v != u and partner[v] < 0 and weights[u] + weights[v] <= bound + _TOLERANCE:
                    rating[v] = rating.get(v, 0.0) + share
        if rating:
            v = max(rating, key=lambda x: (rating[x], -x))
            partner[u], partner[v] = v, u
        else:
            partner[u] = u
    mapping = np.full(hg.n_nodes, -1, dtype=np.int64)
    clusters = 0
    for u in range(hg.n_nodes):
        if mapping[u] < 0:
            mapping[u] = mapping[partner[u]] = clusters
            clusters += 1
    return mapping, clusters


def _grow(hg: Hypergraph, p: int, bound: float, rng: np.random.Generator) -> List[int]:
    """Greedy graph growing: fill cells 0..p-2 from random seeds, the rest goes to p-1."""
    n = hg.n_nodes
    incidence = hg.incidence()
    target = float(hg.node_weights.sum()) / p
    order = rng.permutation(n).tolist()
    assign = [-1] * n
    for cell in range(p - 1):
        free = [v for v in order if assign[v] < 0]
        if not free:
            break
        load = 0.0
        connection: Dict[int, float] = {}
        frontier = [free[0]]
        while frontier:
            v = frontier.pop()
            assign[v] = cell
            load += hg.node_weights[v]
            connection.pop(v, None)
            for e in incidence[v]:
                for u in hg.edges[e]:
                    if assign[u] < 0:
                        connection[u] = connection.get(u, 0.0) + float(hg.edge_weights[e])
            if load >= target:
                break
            fitting = [u for u in connection if load + hg.node_weights[u] <= bound + _TOLERANCE]
            if not fitting:
                fitting = [u for u in order if assign[u] < 0 and load + hg.node_weights[u] <= bound + _TOLERANCE][:1]
            if fitting:
                frontier.append(max(fitting, key=lambda u: (connection.get(u, 0.0), -u)))
    return [p - 1 if c < 0 else c for c in assign]


def _largest_first(hg: Hypergraph, p: int) -> List[int]:
    loads = [0.0] * p
    assign = [0] * hg.n_nodes
    for v in sorted(range(hg.n_nodes), key=lambda x: (-hg.node_weights[x], x)):
        cell = min(range(p), key=lambda c: (loads[c], c))
        assign[v] = cell
        loads[cell] += hg.node_weights[v]
    return assign


def partition_multilevel(
    hg: Hypergraph,
    p: int,
    epsilon: float = PARTITION_EPSILON,
    seed: int = 0,
    restarts: int = 8,
) -> Partition:
    """Balanced p-way partition minimizing the weight of cut hyperedges; deterministic per seed."""
    bound = _check_request(hg, p, epsilon)
    if p == 1:
        return _result(hg, [0] * hg.n_nodes, 1, bound)
    started = time.perf_counter()
    rng = np.random.default_rng(seed)

    limit = max(8 * p, 50)
    graphs: List[Hypergraph] = [hg]
    mappings: List[np.ndarray] = []
    while graphs[-1].n_nodes > limit:
        mapping, clusters = _match(graphs[-1], bound, rng)
        if clusters > 0.95 * graphs[-1].n_nodes or clusters < p:
            break
        mappings.append(mapping)
        graphs.append(_contract(graphs[-1], mapping, clusters))

    coarsest = graphs[-1]
    best: Optional[List[int]] = None
    best_cut = math.inf
    for _ in range(max(1, restarts)):
        state = _RefineState(coarsest, p, bound, _grow(coarsest, p, bound, rng))
        if not state.repair():
            continue
        state.refine()
        cut = state.cut()
        if cut < best_cut - _TOLERANCE:
            best, best_cut = list(state.assign), cut
    if best is None:
        state = _RefineState(coarsest, p, bound, _largest_first(coarsest, p))
        if not state.repair():
            raise InfeasiblePartitionError(f"no {p}-way assignment satisfies the cell bound {bound:g}")
        state.refine()
        best = list(state.assign)

    assignment = np.asarray(best, dtype=np.int64)
    for level in range(len(mappings) - 1, -1, -1):
        assignment = assignment[mappings[level]]
        state = _RefineState(graphs[level], p, bound, assignment)
        state.refine()
        assignment = np.asarray(state.assign, dtype=np.int64)

    result = _result(hg, assignment, p, bound)
    logger.info(
        "partition_done p=%d nodes=%d levels=%d cut=%.4f elapsed=%.3fs",
        p, hg.n_nodes, len(graphs), result.cut, time.perf_counter() - started,
    )
    return result


def partition_exact(
    hg: Hypergraph,
    p: int,
    lower: Optional[Sequence[float]] = None,
    upper: Optional[Sequence[float]] = None,
    epsilon: float = PARTITION_EPSILON,
    nonempty: bool = True,
) -> Partition:
    """Maximize uncut hyperedge weight subject to lower/upper cell weights.

    Defaults: lower 0, upper the multilevel balance bound. Among optimal
    assignments the lexicographically smallest is returned.
    """
    n = hg.n_nodes
    if n > EXACT_PARTITION_MAX_NODES:
        raise PartitionError(f"exact partitioning is limited to {EXACT_PARTITION_MAX_NODES} nodes, got {n}")
    if p < 1:
        raise PartitionError("p must be >= 1")
    if nonempty and p > n:
        raise InfeasiblePartitionError(f"cannot split {n} nodes into {p} non-empty cells")
    total = float(hg.node_weights.sum())
    if upper is None:
        upper = [balance_bound(total, p, epsilon)] * p
    if lower is None:
        lower = [0.0] * p
    lower, upper = [float(x) for x in lower], [float(x) for x in upper]
    if len(lower) != p or len(upper) != p:
        raise PartitionError("bounds must have one entry per cell")
    for c, (a, b) in enumerate(zip(lower, upper)):
        if a > b:
            raise PartitionError(f"cell {c}: lower bound {a:g} exceeds upper bound {b:g}")

    weights = hg.node_weights.tolist()
    edge_weights = hg.edge_weights.tolist()
    incidence = hg.incidence()
    remaining = np.concatenate((np.cumsum(weights[::-1])[::-1], [0.0])).tolist() if n else [0.0]
    symmetric = len(set(zip(lower, upper))) == 1

    assign = [-1] * n
    edge_cell = [-1] * hg.n_edges
    broken = [False] * hg.n_edges
    load = [0.0] * p
    size = [0] * p
    state = {"alive": float(sum(edge_weights)), "best": -1.0, "solution": None}

    def search(v: int, used: int) -> None:
        if state["alive"] <= state["best"] + _TOLERANCE:
            return
        deficit = sum(max(0.0, lower[c] - load[c]) for c in range(p))
        if deficit > remaining[v] + _TOLERANCE:
            return
        if nonempty and sum(1 for c in range(p) if size[c] == 0) > n - v:
            return
        if v == n:
            state["best"] = state["alive"]
            state["solution"] = list(assign)
            return
        last = min(p, used + 1) if symmetric else p
        for c in range(last):
            if load[c] + weights[v] > upper[c] + _TOLERANCE:
                continue
            touched: List[int] = []
            cut_now: List[int] = []
            for e in incidence[v]:
                if edge_cell[e] < 0:
                    edge_cell[e] = c
                    touched.append(e)
                elif edge_cell[e] != c and not broken[e]:
                    broken[e] = True
                    state["alive"] -= edge_weights[e]
                    cut_now.append(e)
            assign[v] = c
            load[c] += weights[v]
            size[c] += 1
            search(v + 1, max(used, c + 1))
            size[c] -= 1
            load[c] -= weights[v]
            assign[v] = -1
            for e in cut_now:
                broken[e] = False
                state["alive"] += edge_weights[e]
            for e in touched:
                edge_cell[e] = -1

    started = time.perf_counter()
    search(0, 0)
    if state["solution"] is None:
        raise InfeasiblePartitionError(f"no {p}-way assignment satisfies the cell bounds")
    result = _result(hg, state["solution"], p, max(upper))
    logger.info(
        "partition_exact_done p=%d nodes=%d objective=%.4f elapsed=%.3fs",
        p, n, result.objective, time.perf_counter() - started,
    )
    return result
