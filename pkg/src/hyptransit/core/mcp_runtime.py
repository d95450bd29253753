# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""FastMCP runtime assembly and the `hyptransit` command line."""

import argparse
import json
import logging
from typing import Any, Callable, Dict, List, Optional

from mcp.server.fastmcp import FastMCP

from .errors import HypTransitError, error_json
from .log_helpers import logger
from .settings import MAX_TRANSFERS, PARTITION_EPSILON, WALK_SPEED_MPS, WALK_THRESHOLD_S, FOOTPATH_COMPONENT_CAP

mcp_server = FastMCP("hyptransit")

# Feed downloads go through httpx; keep its per-request lines out of the log.
logging.getLogger("httpx").setLevel(logging.WARNING)
logging.getLogger("httpcore").setLevel(logging.WARNING)

QUERY_ENGINES = ("ted", "raptor", "tbtr", "hyptbtr", "hypraptor")
PROFILE_ENGINES = ("otm-rtbtr", "otm-rraptor")
SCHEMES = ("sc1", "sc2", "sc3")
STAGES = ("generated", "uturn_free", "reduced")


def _import_tool_modules() -> None:
    from . import routing_tools  # noqa: F401


def _run_stdio() -> int:
    _import_tool_modules()
    mcp_server.run(transport="stdio")
    return 0


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--snapshot", required=True, help="Timetable snapshot written by `ingest`")
    parser.add_argument("--max-transfers", type=int, default=MAX_TRANSFERS, help="Transfer limit (lambda)")


def _add_partition_flags(parser: argparse.ArgumentParser, multiple: bool = False) -> None:
    if multiple:
        parser.add_argument("--partitions", nargs="+", default=["2"], help="P or AxB, one or more")
    else:
        parser.add_argument("--partitions", default="2", help="P (standard) or AxB (multilevel)")
    parser.add_argument("--scheme", choices=SCHEMES, default="sc1", help="Hypergraph weighting scheme")
    parser.add_argument("--epsilon", type=float, default=PARTITION_EPSILON, help="Allowed cell imbalance")
    parser.add_argument("--seed", type=int, default=7, help="Seed for every random sub-stream")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyptransit",
        description="Bicriterion transit journey planning with partitioned TBTR and RAPTOR.",
        epilog="`hyptransit serve` starts the local stdio MCP server.",
    )
    parser.add_argument("--version", action="store_true", help="Print package version")
    sub = parser.add_subparsers(dest="command")

    ingest = sub.add_parser("ingest", help="GTFS feed -> timetable snapshot")
    ingest.add_argument("--feed", help="Directory with stops/routes/trips/stop_times")
    ingest.add_argument("--url", help="Download a zipped feed instead")
    ingest.add_argument("--download-dir", default="feed", help="Where --url unpacks to")
    ingest.add_argument("--service-day", help="YYYY-MM-DD; filters trips through calendar.txt")
    ingest.add_argument("--walk-threshold", type=int, default=WALK_THRESHOLD_S)
    ingest.add_argument("--walk-speed", type=float, default=WALK_SPEED_MPS)
    ingest.add_argument("--component-cap", type=int, default=FOOTPATH_COMPONENT_CAP)
    ingest.add_argument("--output", default="timetable.ttbl")

    preprocess = sub.add_parser("preprocess", help="Trip-transfer generation and reduction")
    preprocess.add_argument("--snapshot", required=True)
    preprocess.add_argument("--stage", choices=STAGES, default="reduced")
    preprocess.add_argument("--workers", type=int, default=1)
    preprocess.add_argument("--output", default="transfers.ttrs")

    partition = sub.add_parser("partition", help="Partition the route hypergraph into cells")
    partition.add_argument("--snapshot", required=True)
    _add_partition_flags(partition)
    partition.add_argument("--import-partition", help="hMETIS-style partition file (one label per node)")
    partition.add_argument("--output", default="layout.json")

    fillin = sub.add_parser("fillin", help="Fill-in trips or routes for a layout")
    _add_search_flags(fillin)
    fillin.add_argument("--layout", required=True)
    fillin.add_argument("--transfers")
    fillin.add_argument("--engine", choices=PROFILE_ENGINES, default="otm-rtbtr")
    fillin.add_argument("--workers", type=int, default=1)
    fillin.add_argument("--output", default="fillin.json")

    query = sub.add_parser("query", help="Pareto set for one departure")
    _add_search_flags(query)
    query.add_argument("--engine", choices=QUERY_ENGINES, default="raptor")
    query.add_argument("--origin", required=True)
    query.add_argument("--destination", required=True)
    query.add_argument("--departure", required=True, help="HH:MM:SS or seconds past midnight")
    query.add_argument("--transfers")
    query.add_argument("--layout")
    query.add_argument("--fillin")
    query.add_argument("--journeys", action="store_true", help="Print legs of every journey")
    query.add_argument("--stats", action="store_true", help="Print search counters")

    profile = sub.add_parser("profile", help="One-To-Many range query")
    _add_search_flags(profile)
    profile.add_argument("--engine", choices=PROFILE_ENGINES, default="otm-rraptor")
    profile.add_argument("--origin", required=True)
    profile.add_argument("--destinations", help="Comma-separated stop ids")
    profile.add_argument("--dlist-file", help="One stop id per line")
    profile.add_argument("--tlist", help="Comma-separated departures; default: all departures at the origin")
    profile.add_argument("--transfers")
    profile.add_argument("--no-prune", action="store_true", help="Disable destination pruning")
    profile.add_argument("--stats", action="store_true")

    verify = sub.add_parser("verify", help="Check every engine against the oracle")
    _add_search_flags(verify)
    _add_partition_flags(verify)
    verify.add_argument("--queries", type=int, default=100)
    verify.add_argument("--transfers", help="Transfer set to check; default: built at stage uturn_free")
    verify.add_argument("--reproducer", help="Write the first failing query here")
    verify.add_argument("--workers", type=int, default=1)

    bench = sub.add_parser("bench", help="Timing and counter report")
    _add_search_flags(bench)
    _add_partition_flags(bench, multiple=True)
    bench.add_argument("--engines", default="raptor,tbtr,hyptbtr,hypraptor")
    bench.add_argument("--queries", type=int, default=100)
    bench.add_argument("--repetitions", type=int, default=1)
    bench.add_argument("--transfers")
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out", choices=("csv", "json"), default="json")
    bench.add_argument("--save-dir", help="Also write engines.csv, partitions.csv and report.json")

    synth = sub.add_parser("synth", help="Write a synthetic GTFS feed")
    synth.add_argument("--output", required=True)
    synth.add_argument("--stops", type=int, default=30)
    synth.add_argument("--routes", type=int, default=8)
    synth.add_argument("--trips-per-route", type=int, default=12)
    synth.add_argument("--footpath-density", type=float, default=0.1)
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--toy", action="store_true", help="Write the five-route example network instead")

    hmetis = sub.add_parser("export-hmetis", help="Write the route hypergraph in hMETIS format")
    hmetis.add_argument("--snapshot", required=True)
    hmetis.add_argument("--scheme", choices=SCHEMES, default="sc1")
    hmetis.add_argument("--output", default="routes.hgr")

    sub.add_parser("serve", help="Run the stdio MCP server")
    return parser


def _handlers() -> Dict[str, Callable[[argparse.Namespace], Any]]:
    from . import commands

    return {
        "ingest": commands.cmd_ingest,
        "preprocess": commands.cmd_preprocess,
        "partition": commands.cmd_partition,
        "fillin": commands.cmd_fillin,
        "query": commands.cmd_query,
        "profile": commands.cmd_profile,
        "verify": commands.cmd_verify,
        "bench": commands.cmd_bench,
        "synth": commands.cmd_synth,
        "export-hmetis": commands.cmd_export_hmetis,
    }


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entrypoint used by `python -m hyptransit` and scripts."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        from hyptransit import __version__

        print(f"hyptransit v{__version__}")
        return 0

    if args.command is None:
        parser.print_help()
        return 2
    if args.command == "serve":
        return _run_stdio()

    logger.info("cli_command name=%s", args.command)
    try:
        payload = _handlers()[args.command](args)
    except (HypTransitError, ValueError, OSError) as exc:
        logger.error("cli_command_failed name=%s type=%s message=%s", args.command, type(exc).__name__, exc)
        print(error_json(exc))
        return 1

    if isinstance(payload, str):
        print(payload, end="" if payload.endswith("\n") else "\n")
    else:
        print(json.dumps(payload, indent=2))
    if args.command == "verify" and not payload.get("ok", False):
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
