# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Command handlers behind the `hyptransit` CLI.

Every handler takes the parsed argparse namespace and returns a JSON-ready
payload; `mcp_runtime.main` prints it and maps errors to exit codes.
"""

import argparse
import datetime as dt
import pathlib
from typing import Any, Dict, List, Optional, Sequence

from .bench import partition_seed, run_bench, run_verify
from .cells import build_layout, layout_from_assignment, layout_to_json, load_layout, parse_partitions, save_layout
from .errors import UnknownStopError
from .fillin import compute_fillin, enumerate_pqueries, load_fillin, save_fillin
from .gtfs_feed import build_timetable, download_feed, format_gtfs_time, load_gtfs, parse_gtfs_time
from .hyp_query import HypContext, hypraptor_query, hyptbtr_query
from .hypergraph import build_hypergraph, export_hmetis, import_partition
from .log_helpers import logger
from .pareto import ParetoSet, SearchStats, departure_times
from .raptor_engine import otm_rraptor, raptor_query
from .snapshot_io import read_timetable, read_transfers, write_timetable, write_transfers
from .synth import synthesize_feed, write_toy_feed
from .tbtr_engine import otm_rtbtr, tbtr_query
from .te_oracle import oracle_pareto
from .timetable import Timetable, validate
from .transfer_set import TransferSet, preprocess_transfers


def pareto_rows(pareto: ParetoSet) -> List[Dict[str, Any]]:
    return [
        {"arrival": arrival, "arrival_time": format_gtfs_time(arrival), "transfers": transfers}
        for arrival, transfers in pareto
    ]


def parse_clock(value: str) -> int:
    """HH:MM:SS or plain seconds past midnight."""
    text = str(value).strip()
    if text.isdigit():
        return int(text)
    return parse_gtfs_time(text)


def resolve_stop(tt: Timetable, value: Any) -> int:
    """GTFS stop id first, then a dense index."""
    text = str(value).strip()
    try:
        return tt.stop_index(text)
    except UnknownStopError:
        if text.isdigit():
            return tt.check_stop(int(text))
        raise


def _load_transfers(tt: Timetable, path: Optional[str]) -> Optional[TransferSet]:
    return read_transfers(path, expected_trips=tt.n_trips) if path else None


def _require_transfers(tt: Timetable, path: Optional[str], engine: str) -> TransferSet:
    if not path:
        raise ValueError(f"engine {engine} needs --transfers (run `hyptransit preprocess` first)")
    return read_transfers(path, expected_trips=tt.n_trips)


def _hyp_context(tt: Timetable, args: argparse.Namespace) -> HypContext:
    if not args.layout or not args.fillin:
        raise ValueError(f"engine {args.engine} needs --layout and --fillin")
    return HypContext(tt, load_layout(args.layout, tt), load_fillin(args.fillin, tt))


# -- pipeline stages ------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> Dict[str, Any]:
    feed = args.feed
    if args.url:
        feed = download_feed(args.url, args.download_dir)
    if not feed:
        raise ValueError("ingest needs --feed or --url")
    service_day = dt.date.fromisoformat(args.service_day) if args.service_day else None
    raw = load_gtfs(feed, service_day)
    tt, stats = build_timetable(raw, args.walk_threshold, args.walk_speed, args.component_cap)
    validate(tt)
    path = write_timetable(tt, args.output, stats)
    return {"snapshot": str(path), **{key: value for key, value in stats.items() if key != "warnings"},
            "warnings": len(stats.get("warnings", []))}


def cmd_preprocess(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    transfers, stats = preprocess_transfers(tt, args.stage, args.workers)
    path = write_transfers(transfers, args.output, stats)
    return {"transfers": str(path), "count": len(transfers), **stats}


def cmd_partition(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    hg = build_hypergraph(tt, args.scheme)
    if args.import_partition:
        top_p, child_p = parse_partitions(args.partitions)
        if child_p is not None:
            raise ValueError("--import-partition takes a flat partition count, not AxB")
        labels = import_partition(args.import_partition, hg.n_nodes)
        layout = layout_from_assignment(tt, hg, labels, top_p)
    else:
        layout = build_layout(tt, hg, args.partitions, args.epsilon, partition_seed(args.seed))
    path = save_layout(layout, args.output, tt)
    payload = layout_to_json(layout, tt)
    workload = enumerate_pqueries(layout)
    return {
        "layout": str(path),
        "kind": payload["kind"],
        "scheme": args.scheme,
        "scut": payload["scut"],
        "cutstops": payload.get("cutstops", []),
        "pqueries": workload.stats,
        "warnings": list(getattr(layout, "warnings", [])),
    }


def cmd_fillin(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    layout = load_layout(args.layout, tt)
    transfers = _require_transfers(tt, args.transfers, args.engine) if args.engine == "otm-rtbtr" else None
    workload = enumerate_pqueries(layout)
    fillin = compute_fillin(tt, transfers, workload, args.engine, args.max_transfers, args.workers)
    path = save_fillin(fillin, args.output, tt)
    return {"fillin": str(path), "flavor": fillin.flavor, **fillin.stats}


# -- queries ----------------------------------------------------------------------

def cmd_query(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    origin, target = resolve_stop(tt, args.origin), resolve_stop(tt, args.destination)
    departure = parse_clock(args.departure)
    stats = SearchStats()
    warnings: List[str] = []
    journeys: Sequence[Any] = ()
    if args.engine == "ted":
        pareto = oracle_pareto(tt, origin, target, departure, args.max_transfers)
    elif args.engine == "raptor":
        result = raptor_query(tt, origin, target, departure, args.max_transfers, stats, args.journeys)
        pareto, journeys, warnings = result.pareto, result.journeys, result.warnings
    elif args.engine == "tbtr":
        transfers = _require_transfers(tt, args.transfers, args.engine)
        result = tbtr_query(tt, transfers, origin, target, departure, args.max_transfers, stats, args.journeys)
        pareto, journeys, warnings = result.pareto, result.journeys, result.warnings
    elif args.engine == "hyptbtr":
        transfers = _require_transfers(tt, args.transfers, args.engine)
        result = hyptbtr_query(tt, transfers, _hyp_context(tt, args), origin, target, departure,
                               args.max_transfers, stats, args.journeys)
        pareto, journeys, warnings = result.pareto, result.journeys, result.warnings
    else:
        result = hypraptor_query(tt, _hyp_context(tt, args), origin, target, departure,
                                 args.max_transfers, stats, args.journeys)
        pareto, journeys, warnings = result.pareto, result.journeys, result.warnings
    payload: Dict[str, Any] = {
        "engine": args.engine,
        "origin": tt.stop_ids[origin],
        "destination": tt.stop_ids[target],
        "departure": format_gtfs_time(departure),
        "max_transfers": args.max_transfers,
        "pareto": pareto_rows(pareto),
    }
    if args.journeys:
        payload["journeys"] = [
            {"arrival_time": format_gtfs_time(j.arrival), "transfers": j.transfers, "legs": j.describe(tt)}
            for j in journeys
        ]
    if args.stats and args.engine != "ted":
        payload["stats"] = stats.to_dict()
    if warnings:
        payload["warnings"] = warnings
    return payload


def _destinations(tt: Timetable, args: argparse.Namespace) -> List[int]:
    names: List[str] = []
    if args.destinations:
        names.extend(part for part in args.destinations.split(",") if part.strip())
    if args.dlist_file:
        text = pathlib.Path(args.dlist_file).read_text(encoding="utf-8")
        names.extend(line for line in text.splitlines() if line.strip() and not line.startswith("#"))
    if not names:
        raise ValueError("profile needs --destinations or --dlist-file")
    return list(dict.fromkeys(resolve_stop(tt, name) for name in names))


def cmd_profile(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    origin = resolve_stop(tt, args.origin)
    dlist = _destinations(tt, args)
    tlist = [parse_clock(value) for value in args.tlist.split(",")] if args.tlist else departure_times(tt, origin)
    stats = SearchStats()
    prune = not args.no_prune
    if args.engine == "otm-rtbtr":
        transfers = _require_transfers(tt, args.transfers, args.engine)
        profile = otm_rtbtr(tt, transfers, origin, dlist, args.max_transfers, tlist, prune, stats)
    else:
        profile = otm_rraptor(tt, origin, dlist, args.max_transfers, tlist, prune, stats)
    payload: Dict[str, Any] = {
        "engine": args.engine,
        "origin": tt.stop_ids[origin],
        "departures": len(tlist),
        "profiles": {
            tt.stop_ids[stop]: [
                {"departure": format_gtfs_time(when), "pareto": pareto_rows(pareto)}
                for when, pareto in profile.rows.get(stop, [])
            ]
            for stop in dlist
        },
    }
    if args.stats:
        counters = stats.to_dict()
        counters["dropped_targets"] = [
            {"departure": format_gtfs_time(when), "round": n, "stop": tt.stop_ids[stop]}
            for when, n, stop in stats.dropped_targets
        ]
        payload["stats"] = counters
    if profile.warnings:
        payload["warnings"] = profile.warnings
    return payload


# -- harness ----------------------------------------------------------------------

def cmd_verify(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    report = run_verify(
        tt, args.queries, args.seed,
        transfers=_load_transfers(tt, args.transfers),
        partitions=args.partitions,
        scheme=args.scheme,
        epsilon=args.epsilon,
        max_transfers=args.max_transfers,
        reproducer_path=args.reproducer,
        workers=args.workers,
    )
    return report.to_dict()


def cmd_bench(args: argparse.Namespace) -> Any:
    tt = read_timetable(args.snapshot)
    engines = [engine.strip() for engine in args.engines.split(",") if engine.strip()]
    report = run_bench(
        tt, engines, args.partitions,
        num_queries=args.queries,
        repetitions=args.repetitions,
        seed=args.seed,
        transfers=_load_transfers(tt, args.transfers),
        scheme=args.scheme,
        epsilon=args.epsilon,
        max_transfers=args.max_transfers,
        workers=args.workers,
    )
    if args.save_dir:
        written = report.save(args.save_dir)
        logger.info("bench_saved files=%s", ",".join(str(path) for path in written))
    if args.out == "csv":
        return report.to_csv()
    return report.to_dict()


def cmd_synth(args: argparse.Namespace) -> Dict[str, Any]:
    if args.toy:
        path = write_toy_feed(args.output)
    else:
        path = synthesize_feed(
            args.output, args.stops, args.routes, args.trips_per_route, args.footpath_density, args.seed,
        )
    return {"feed": str(path), "toy": bool(args.toy)}


def cmd_export_hmetis(args: argparse.Namespace) -> Dict[str, Any]:
    tt = read_timetable(args.snapshot)
    hg = build_hypergraph(tt, args.scheme)
    path = export_hmetis(hg, args.output)
    return {"hmetis": str(path), "scheme": args.scheme, "nodes": hg.n_nodes, "edges": hg.n_edges}
