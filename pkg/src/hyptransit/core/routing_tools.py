# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Read-only MCP tools over timetable snapshots."""

import functools
import json
import os
import threading
from typing import Any, Dict, List, Tuple

from mcp.types import ToolAnnotations

from .commands import pareto_rows, parse_clock, resolve_stop
from .errors import HypTransitError, error_json
from .gtfs_feed import format_gtfs_time
from .log_helpers import logger
from .mcp_runtime import mcp_server
from .pareto import departure_times
from .raptor_engine import otm_rraptor, raptor_query
from .snapshot_io import read_timetable, read_transfers
from .tbtr_engine import otm_rtbtr, tbtr_query
from .te_oracle import oracle_pareto
from .timetable import Timetable
from .transfer_set import TransferSet

_CACHE_LIMIT = 4
_cache: Dict[Tuple[str, str], Tuple[float, Any]] = {}
_cache_lock = threading.Lock()


def _cached(kind: str, path: str, loader) -> Any:
    """Load through a small cache keyed by absolute path; a newer mtime invalidates the entry."""
    key = (kind, os.path.abspath(path))
    mtime = os.path.getmtime(key[1])
    with _cache_lock:
        hit = _cache.get(key)
        if hit is not None and hit[0] == mtime:
            return hit[1]
    value = loader(key[1])
    with _cache_lock:
        if len(_cache) >= _CACHE_LIMIT and key not in _cache:
            _cache.pop(next(iter(_cache)))
        _cache[key] = (mtime, value)
    logger.debug("snapshot_cache_load kind=%s path=%s", kind, key[1])
    return value


def clear_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _timetable(snapshot_path: str) -> Timetable:
    return _cached("timetable", snapshot_path, read_timetable)


def _transfers(tt: Timetable, transfers_path: str) -> TransferSet:
    if not transfers_path:
        raise ValueError("tbtr engines need transfers_path (a file written by `hyptransit preprocess`)")
    return _cached("transfers", transfers_path, lambda path: read_transfers(path, expected_trips=tt.n_trips))


def routing_tool(func):
    """Serialize results as JSON and keep errors inside the tool response."""

    @functools.wraps(func)
    async def wrapper(*args, **kwargs):
        logger.debug("tool_call name=%s kwargs=%s", func.__name__, kwargs)
        try:
            result = await func(*args, **kwargs)
            return json.dumps(result, indent=2) if isinstance(result, dict) else result
        except (HypTransitError, ValueError, OSError) as exc:
            logger.warning("tool_error name=%s type=%s message=%s", func.__name__, type(exc).__name__, exc)
            return error_json(exc)
        except Exception as exc:  # noqa: BLE001
            logger.exception("Unhandled tool exception in %s", func.__name__)
            return json.dumps({"error": str(exc)}, indent=2)

    return wrapper


@mcp_server.tool(annotations=ToolAnnotations(readOnlyHint=True))
@routing_tool
async def describe_timetable(snapshot_path: str) -> str:
    """Counts of stops, routes, trips, footpaths and stop events in a snapshot."""
    tt = _timetable(snapshot_path)
    return {"snapshot": snapshot_path, **tt.describe()}


@mcp_server.tool(annotations=ToolAnnotations(readOnlyHint=True))
@routing_tool
async def plan_journeys(
    snapshot_path: str,
    origin: str,
    destination: str,
    departure: str,
    engine: str = "raptor",
    max_transfers: int = 4,
    transfers_path: str = "",
) -> str:
    """Pareto-optimal (arrival, transfers) journeys for one departure time.

    `engine` is one of ted, raptor, tbtr; tbtr also needs `transfers_path`.
    """
    tt = _timetable(snapshot_path)
    source, target = resolve_stop(tt, origin), resolve_stop(tt, destination)
    when = parse_clock(departure)
    if engine == "ted":
        pareto = oracle_pareto(tt, source, target, when, int(max_transfers))
        journeys: List[Dict[str, Any]] = []
    elif engine in ("raptor", "tbtr"):
        if engine == "raptor":
            result = raptor_query(tt, source, target, when, int(max_transfers), record_journeys=True)
        else:
            result = tbtr_query(tt, _transfers(tt, transfers_path), source, target, when,
                                int(max_transfers), record_journeys=True)
        pareto = result.pareto
        journeys = [
            {"arrival_time": format_gtfs_time(j.arrival), "transfers": j.transfers, "legs": j.describe(tt)}
            for j in result.journeys
        ]
    else:
        raise ValueError(f"unknown engine {engine!r}; expected ted, raptor or tbtr")
    return {
        "engine": engine,
        "origin": tt.stop_ids[source],
        "destination": tt.stop_ids[target],
        "departure": format_gtfs_time(when),
        "pareto": pareto_rows(pareto),
        "journeys": journeys,
    }


@mcp_server.tool(annotations=ToolAnnotations(readOnlyHint=True))
@routing_tool
async def profile_journeys(
    snapshot_path: str,
    origin: str,
    destinations: List[str],
    engine: str = "otm-rraptor",
    max_transfers: int = 4,
    transfers_path: str = "",
) -> str:
    """Pareto rows for every departure at `origin`, per destination."""
    tt = _timetable(snapshot_path)
    source = resolve_stop(tt, origin)
    dlist = list(dict.fromkeys(resolve_stop(tt, stop) for stop in destinations))
    if not dlist:
        raise ValueError("destinations must name at least one stop")
    tlist = departure_times(tt, source)
    if engine == "otm-rraptor":
        profile = otm_rraptor(tt, source, dlist, int(max_transfers), tlist)
    elif engine == "otm-rtbtr":
        profile = otm_rtbtr(tt, _transfers(tt, transfers_path), source, dlist, int(max_transfers), tlist)
    else:
        raise ValueError(f"unknown engine {engine!r}; expected otm-rraptor or otm-rtbtr")
    return {
        "engine": engine,
        "origin": tt.stop_ids[source],
        "profiles": {
            tt.stop_ids[stop]: [
                {"departure": format_gtfs_time(when), "pareto": pareto_rows(pareto)}
                for when, pareto in profile.rows.get(stop, [])
            ]
            for stop in dlist
        },
    }
