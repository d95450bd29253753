# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.cells import (
    NestedLayout,
    PartitionLayout,
    build_layout,
    derive_cells,
    layout_from_assignment,
    load_layout,
    nested_from_routes,
    nested_partition,
    parse_partitions,
    save_layout,
)
from hyptransit.core.errors import LayoutMismatchError, PartitionError
from hyptransit.core.hypergraph import build_hypergraph


def _names(tt, stops):
    return {tt.stop_ids[s] for s in stops}


def test_toy_stop_cells(toy):
    layout = derive_cells(toy, [3, 2, 2, 1, 3])
    assert [_names(toy, cell) for cell in layout.stop_cells] == [
        {"s0", "s2", "s8", "s9"}, set(), {"s5", "s6"}, {"s3", "s7", "sd"},
    ]
    assert layout.route_cells == [frozenset({3}), frozenset({1, 2}), frozenset({0, 4})]
    assert layout.footpath_cells == {(toy.stop_index("s3"), toy.stop_index("sd")): 3}
    assert layout.scut() == {"count": 4, "percent": round(100 * 4 / 9, 4)}


def test_footpath_cell_splits_its_stops(toy):
    s3, sd = toy.stop_index("s3"), toy.stop_index("sd")
    layout = derive_cells(toy, [3, 2, 2, 1, 3], footpath_cells={(s3, sd): 1}, p=3)
    assert {s3, sd} <= layout.cutstops


def test_derive_cells_validates_input(toy):
    with pytest.raises(LayoutMismatchError):
        derive_cells(toy, [1, 2])
    with pytest.raises(PartitionError, match="1..p"):
        derive_cells(toy, [0, 1, 1, 1, 1])


def test_assignment_translation(toy):
    hg = build_hypergraph(toy)
    layout = layout_from_assignment(toy, hg, [2, 1, 1, 0, 2, 2], 3)
    assert layout.route_cell.tolist() == [3, 2, 2, 1, 3]
    assert _names(toy, layout.cutstops) == {"s0", "s2", "s8", "s9"}
    with pytest.raises(PartitionError):
        layout_from_assignment(toy, hg, [0, 0, 0, 0, 0, 5], 3)


def _toy_nested(toy):
    top = derive_cells(toy, [1, 1, 2, 2, 2])
    universes = {
        1: frozenset(toy.stop_index(s) for s in ("s0", "s2", "s3", "s5", "s8", "sd")),
        2: frozenset(toy.stop_index(s) for s in ("s2", "s6", "s7", "s8", "s9", "sd")),
    }

    def child(route_cell, cells):
        stop_cell = np.zeros(toy.n_stops, dtype=np.int64)
        for name, cell in cells.items():
            stop_cell[toy.stop_index(name)] = cell
        return PartitionLayout(2, np.asarray(route_cell), stop_cell)

    children = {
        1: child([1, 2, 1, 1, 1], {"s2": 1, "s3": 1, "s5": 2, "s8": 2, "sd": 1}),
        2: child([1, 1, 1, 2, 2], {"s2": 1, "s6": 1, "s8": 2, "s7": 2, "sd": 2}),
    }
    s3, sd = toy.stop_index("s3"), toy.stop_index("sd")
    children[1].footpath_cells[(s3, sd)] = 1
    return NestedLayout(top=top, children=children, universes=universes)


def test_nested_cutstops_by_level(toy):
    nested = _toy_nested(toy)
    assert _names(toy, nested.level1_cutstops()) == {"s2", "s8", "sd"}
    assert _names(toy, nested.level2_cutstops(1)) == {"s0"}
    assert _names(toy, nested.level2_cutstops(2)) == {"s9"}
    assert nested.scut()["level2"] == 2


def test_nested_flatten_matches_leaf_cells(toy):
    flat = _toy_nested(toy).flatten()
    direct = derive_cells(toy, [1, 2, 3, 4, 4])
    assert flat.p == 4
    assert flat.route_cell.tolist() == [1, 2, 3, 4, 4]
    assert flat.stop_cell.tolist() == direct.stop_cell.tolist()


def test_nested_partition_on_synth(synth_instances):
    tt, _ = synth_instances[2]
    hg = build_hypergraph(tt)
    nested = nested_partition(hg, tt, 2, 2, epsilon=0.3, seed=3)
    assert nested.top.p == 2
    assert sorted(nested.children) == [1, 2]
    for parent, child in nested.children.items():
        assert nested.level2_cutstops(parent) <= nested.universes[parent]
    flat = nested.flatten()
    assert flat.cutstops >= nested.level1_cutstops()
    with pytest.raises(PartitionError):
        nested_partition(hg, tt, 1, 2)


@pytest.mark.parametrize("spec,expected", [("6", (6, None)), ("3x2", (3, 2)), (" 2X3 ", (2, 3))])
def test_parse_partitions(spec, expected):
    assert parse_partitions(spec) == expected


@pytest.mark.parametrize("spec", ["0", "1x2", "ax2", "2x0", "2x2x2"])
def test_parse_partitions_rejects(spec):
    with pytest.raises(PartitionError):
        parse_partitions(spec)


def test_build_layout_dispatch(synth_instances):
    tt, _ = synth_instances[1]
    hg = build_hypergraph(tt)
    assert isinstance(build_layout(tt, hg, "2", seed=1), PartitionLayout)
    assert isinstance(build_layout(tt, hg, "2x2", seed=1), NestedLayout)


def test_layout_json_round_trip(toy, tmp_path):
    standard = derive_cells(toy, [3, 2, 2, 1, 3])
    path = save_layout(standard, tmp_path / "layout.json", toy)
    loaded = load_layout(path, toy)
    assert loaded.stop_cell.tolist() == standard.stop_cell.tolist()
    assert loaded.footpath_cells == standard.footpath_cells

    nested = _toy_nested(toy)
    loaded_nested = load_layout(save_layout(nested, tmp_path / "nested.json", toy), toy)
    assert isinstance(loaded_nested, NestedLayout)
    assert loaded_nested.level2_cutstops(1) == nested.level2_cutstops(1)


def test_layout_for_other_timetable_rejected(toy, synth_instances, tmp_path):
    path = save_layout(derive_cells(toy, [3, 2, 2, 1, 3]), tmp_path / "layout.json")
    tt, _ = synth_instances[0]
    with pytest.raises(LayoutMismatchError):
        load_layout(path, tt)
    with pytest.raises(LayoutMismatchError, match="not found"):
        load_layout(tmp_path / "missing.json")


def test_nested_from_routes(nested_network):
    nested = nested_from_routes(nested_network, [1, 1, 2, 2, 3, 3], [1, 2, 1, 2, 1, 2])
    assert {nested_network.stop_ids[s] for s in nested.level1_cutstops()} == {"g1", "g2", "g3", "g4"}
    assert [{nested_network.stop_ids[s] for s in nested.level2_cutstops(p)} for p in (1, 2, 3)] == [
        {"k1"}, {"k2"}, {"k3"},
    ]
    assert nested.flatten().route_cell.tolist() == [1, 2, 3, 4, 5, 6]
    with pytest.raises(LayoutMismatchError):
        nested_from_routes(nested_network, [1, 1, 2, 2, 3, 3], [1, 2])
    with pytest.raises(PartitionError, match="1..p"):
        nested_from_routes(nested_network, [1, 1, 2, 2, 3, 3], [0, 1, 1, 1, 1, 1])
