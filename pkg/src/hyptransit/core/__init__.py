# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Public exports for hyptransit core modules."""

from .bench import BenchReport, VerifyReport, run_bench, run_verify
from .cells import (
    NestedLayout,
    PartitionLayout,
    build_layout,
    derive_cells,
    load_layout,
    nested_partition,
    partition_timetable,
    save_layout,
)
from .errors import (
    FootpathError,
    GtfsFeedError,
    HypTransitError,
    InfeasiblePartitionError,
    LayoutMismatchError,
    PartitionError,
    SnapshotFormatError,
    TimetableError,
    UnknownStopError,
    error_payload,
)
from .fillin import (
    FillInSet,
    Workload,
    compute_fillin,
    enumerate_pqueries,
    enumerate_pqueries_multilevel,
    enumerate_pqueries_standard,
    load_fillin,
    save_fillin,
)
from .footpaths import build_footpaths, close_footpaths
from .gtfs_feed import build_timetable, canonicalize_routes, download_feed, load_gtfs, remove_overtaking_trips
from .hyp_query import HypContext, hypraptor_query, hyptbtr_query, labeling
from .hypergraph import Hypergraph, build_hypergraph, export_hmetis, import_partition, read_hmetis
from .mcp_runtime import main, mcp_server
from .pareto import Journey, Leg, Profile, QueryResult, SearchStats
from .partitioner import Partition, partition_exact, partition_multilevel
from .raptor_engine import otm_rraptor, raptor_query, rraptor
from .routing_tools import describe_timetable, plan_journeys, profile_journeys
from .snapshot_io import read_timetable, read_transfers, write_timetable, write_transfers
from .synth import synthesize_feed, write_toy_feed
from .tbtr_engine import otm_rtbtr, rtbtr, tbtr_query
from .te_oracle import build_te_graph, oracle_earliest_arrival, oracle_pareto
from .timetable import FootpathGraph, Route, Timetable, Trip, neighborhood, validate
from .transfer_set import TransferSet, generate_transfers, preprocess_transfers, reduce_transfers, remove_uturns

__all__ = [
    "mcp_server",
    "main",
    "describe_timetable",
    "plan_journeys",
    "profile_journeys",
    "HypTransitError",
    "GtfsFeedError",
    "TimetableError",
    "FootpathError",
    "UnknownStopError",
    "SnapshotFormatError",
    "PartitionError",
    "InfeasiblePartitionError",
    "LayoutMismatchError",
    "error_payload",
    "Timetable",
    "Route",
    "Trip",
    "FootpathGraph",
    "neighborhood",
    "validate",
    "load_gtfs",
    "download_feed",
    "canonicalize_routes",
    "remove_overtaking_trips",
    "build_timetable",
    "build_footpaths",
    "close_footpaths",
    "read_timetable",
    "write_timetable",
    "read_transfers",
    "write_transfers",
    "Journey",
    "Leg",
    "Profile",
    "QueryResult",
    "SearchStats",
    "build_te_graph",
    "oracle_pareto",
    "oracle_earliest_arrival",
    "raptor_query",
    "rraptor",
    "otm_rraptor",
    "TransferSet",
    "generate_transfers",
    "remove_uturns",
    "reduce_transfers",
    "preprocess_transfers",
    "tbtr_query",
    "rtbtr",
    "otm_rtbtr",
    "Hypergraph",
    "build_hypergraph",
    "export_hmetis",
    "read_hmetis",
    "import_partition",
    "Partition",
    "partition_multilevel",
    "partition_exact",
    "PartitionLayout",
    "NestedLayout",
    "derive_cells",
    "partition_timetable",
    "nested_partition",
    "build_layout",
    "save_layout",
    "load_layout",
    "Workload",
    "FillInSet",
    "enumerate_pqueries",
    "enumerate_pqueries_standard",
    "enumerate_pqueries_multilevel",
    "compute_fillin",
    "save_fillin",
    "load_fillin",
    "labeling",
    "HypContext",
    "hyptbtr_query",
    "hypraptor_query",
    "synthesize_feed",
    "write_toy_feed",
    "run_verify",
    "run_bench",
    "VerifyReport",
    "BenchReport",
]
