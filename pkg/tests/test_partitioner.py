# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.errors import InfeasiblePartitionError, PartitionError
from hyptransit.core.hypergraph import Hypergraph, build_hypergraph, read_hmetis
from hyptransit.core.partitioner import balance_bound, partition_exact, partition_multilevel


def _brute_force_objective(hg, p, epsilon):
    bound = balance_bound(float(hg.node_weights.sum()), p, epsilon)
    best = -1.0
    for assignment in itertools.product(range(p), repeat=hg.n_nodes):
        if len(set(assignment)) < p:
            continue
        loads = np.bincount(assignment, weights=hg.node_weights, minlength=p)
        if loads.max() > bound + 1e-9:
            continue
        best = max(best, float(hg.edge_weights.sum()) - hg.cut_weight(assignment))
    return best


@pytest.mark.parametrize("scheme", ["sc1", "sc2"])
@pytest.mark.parametrize("p", [2, 3])
def test_exact_matches_brute_force(toy, scheme, p):
    hg = build_hypergraph(toy, scheme)
    result = partition_exact(hg, p, epsilon=0.5)
    assert result.objective == pytest.approx(_brute_force_objective(hg, p, 0.5))
    assert result.cell_weights.max() <= result.bound + 1e-9


def test_exact_respects_custom_bounds():
    hg = Hypergraph(node_weights=[1, 1, 1, 1], edges=[(0, 1), (1, 2), (2, 3)], edge_weights=[1, 5, 1])
    result = partition_exact(hg, 2, lower=[1, 3], upper=[1, 3])
    assert sorted(np.bincount(result.assignment, minlength=2).tolist()) == [1, 3]
    assert result.objective == 6.0
    with pytest.raises(PartitionError, match="exceeds upper"):
        partition_exact(hg, 2, lower=[2, 0], upper=[1, 4])


def test_exact_node_limit():
    hg = Hypergraph(node_weights=np.ones(30), edges=[(0, 1)], edge_weights=[1.0])
    with pytest.raises(PartitionError, match="limited"):
        partition_exact(hg, 2)


def test_multilevel_balanced_and_deterministic(synth_instances):
    tt, _ = synth_instances[2]
    hg = build_hypergraph(tt, "sc1")
    first = partition_multilevel(hg, 3, epsilon=0.3, seed=4)
    second = partition_multilevel(hg, 3, epsilon=0.3, seed=4)
    assert np.array_equal(first.assignment, second.assignment)
    assert first.cell_weights.max() <= first.bound + 1e-9
    assert set(first.assignment.tolist()) == {0, 1, 2}
    assert first.cut + first.objective == pytest.approx(float(hg.edge_weights.sum()))


def test_multilevel_close_to_exact_on_toy(toy):
    hg = build_hypergraph(toy, "sc1")
    exact = partition_exact(hg, 2, epsilon=0.2)
    heuristic = partition_multilevel(hg, 2, epsilon=0.2, seed=0)
    assert heuristic.cut >= exact.cut
    assert heuristic.cut <= exact.cut + 1.0


def test_multilevel_beats_round_robin(synth_instances):
    tt, _ = synth_instances[2]
    hg = build_hypergraph(tt, "sc1")
    result = partition_multilevel(hg, 2, epsilon=0.2, seed=1)
    round_robin = [v % 2 for v in range(hg.n_nodes)]
    assert result.cut <= hg.cut_weight(round_robin)


def test_trivial_and_invalid_requests(toy):
    hg = build_hypergraph(toy, "sc1")
    single = partition_multilevel(hg, 1)
    assert single.cut == 0.0
    assert single.assignment.tolist() == [0] * hg.n_nodes
    with pytest.raises(PartitionError, match="non-empty"):
        partition_multilevel(hg, 7)
    with pytest.raises(PartitionError, match="epsilon"):
        partition_multilevel(hg, 2, epsilon=1.5)


def test_heavy_node_is_infeasible():
    hg = Hypergraph(node_weights=[10, 1, 1], edges=[(0, 1), (1, 2)], edge_weights=[1, 1])
    with pytest.raises(InfeasiblePartitionError, match="cell bound"):
        partition_multilevel(hg, 2, epsilon=0.1)


TEN_NODE = Path(__file__).resolve().parent / "fixtures" / "hmetis" / "ten_node.hgr"


def test_ten_node_fixture_cut_is_optimal():
    hg = read_hmetis(TEN_NODE)
    exact = partition_exact(hg, 2, epsilon=0.2)
    assert exact.cut == 1.0
    assert exact.objective == pytest.approx(_brute_force_objective(hg, 2, 0.2))
    heuristic = partition_multilevel(hg, 2, epsilon=0.2, seed=0)
    assert heuristic.cut == exact.cut
    assignment = heuristic.assignment.tolist()
    assert len(set(assignment[:5])) == 1 and len(set(assignment[5:])) == 1
    assert assignment[0] != assignment[5]


def _random_hypergraph(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 13))
    # A path keeps the hypergraph connected, so every split cuts something.
    edges = {(v, v + 1): 1.0 for v in range(n - 1)}
    for _ in range(n):
        size = int(rng.integers(2, 4))
        pins = tuple(sorted(int(v) for v in rng.choice(n, size=size, replace=False)))
        edges[pins] = edges.get(pins, 0.0) + float(rng.integers(1, 4))
    return Hypergraph(node_weights=np.ones(n), edges=list(edges), edge_weights=list(edges.values()))


def test_multilevel_against_exact_on_small_suite():
    exact_cuts, heuristic_cuts = [], []
    for seed in range(12):
        hg = _random_hypergraph(seed)
        p = 3 if hg.n_nodes <= 8 else 2
        exact = partition_exact(hg, p, epsilon=0.2)
        assert exact.objective == pytest.approx(_brute_force_objective(hg, p, 0.2))
        heuristic = partition_multilevel(hg, p, epsilon=0.2, seed=seed)
        assert heuristic.cell_weights.max() <= heuristic.bound + 1e-9
        assert heuristic.cut >= exact.cut - 1e-9
        exact_cuts.append(exact.cut)
        heuristic_cuts.append(heuristic.cut)
    assert sum(heuristic_cuts) <= 1.5 * sum(exact_cuts)
    assert sum(h == pytest.approx(e) for h, e in zip(heuristic_cuts, exact_cuts)) >= len(exact_cuts) / 2
