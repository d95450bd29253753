# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""GTFS ingestion: CSV loading, route canonicalization and timetable assembly."""

import datetime as dt
import io
import pathlib
import time
import zipfile
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import httpx
import numpy as np
import pandas as pd

from .errors import GtfsFeedError
from .footpaths import build_footpaths, close_footpaths
from .log_helpers import USER_AGENT, logger
from .settings import FOOTPATH_COMPONENT_CAP, WALK_SPEED_MPS, WALK_THRESHOLD_S
from .timetable import FootpathGraph, Timetable

REQUIRED_FILES = ("stops.txt", "routes.txt", "trips.txt", "stop_times.txt")
_REQUIRED_COLUMNS = {
    "stops.txt": ("stop_id", "stop_lat", "stop_lon"),
    "routes.txt": ("route_id",),
    "trips.txt": ("trip_id", "route_id", "service_id"),
    "stop_times.txt": ("trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"),
    "transfers.txt": ("from_stop_id", "to_stop_id"),
    "calendar.txt": ("service_id", "start_date", "end_date"),
}
_WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
_TIME_PATTERN = r"^\s*(\d+):([0-5]\d):([0-5]\d)\s*$"
_MAX_DOWNLOAD_ATTEMPTS = 3


@dataclass(frozen=True)
class RawTrip:
    gtfs_id: str
    route_id: str
    stops: Tuple[str, ...]
    arr: Tuple[int, ...]
    dep: Tuple[int, ...]


@dataclass
class RawFeed:
    stop_ids: List[str]
    coords: np.ndarray
    trips: List[RawTrip]
    transfers: Optional[List[Tuple[str, str, int]]] = None
    warnings: List[str] = field(default_factory=list)


@dataclass
class CanonicalRoute:
    stops: Tuple[str, ...]
    trips: List[RawTrip]


def parse_gtfs_time(value: str) -> int:
    """HH:MM:SS to seconds past midnight; hours may exceed 23."""
    parts = str(value).strip().split(":")
    if len(parts) != 3 or not all(part.isdigit() for part in parts):
        raise ValueError(f"bad GTFS time {value!r}")
    hours, minutes, seconds = (int(part) for part in parts)
    if minutes > 59 or seconds > 59:
        raise ValueError(f"bad GTFS time {value!r}")
    return hours * 3600 + minutes * 60 + seconds


def format_gtfs_time(seconds: int) -> str:
    seconds = int(seconds)
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"


def _warn(feed_warnings: List[str], message: str) -> None:
    logger.warning(message)
    feed_warnings.append(message)


def _read_table(feed_dir: pathlib.Path, name: str, required: bool = True) -> Optional[pd.DataFrame]:
    path = feed_dir / name
    if not path.is_file():
        if required:
            raise GtfsFeedError(f"missing required file {name}", file=name)
        return None
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, encoding="utf-8-sig")
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame(columns=list(_REQUIRED_COLUMNS.get(name, ())))
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise GtfsFeedError(f"cannot parse {name}: {exc}", file=name) from exc
    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in _REQUIRED_COLUMNS.get(name, ()) if column not in frame.columns]
    if missing:
        raise GtfsFeedError(f"{name} lacks required columns {missing}", file=name)
    return frame


def _first_bad(mask: pd.Series) -> Optional[int]:
    bad = np.flatnonzero(mask.to_numpy())
    return int(bad[0]) if bad.size else None


def _parse_time_column(frame: pd.DataFrame, column: str, name: str) -> pd.Series:
    parts = frame[column].str.extract(_TIME_PATTERN)
    bad = _first_bad(parts[0].isna())
    if bad is not None:
        raise GtfsFeedError(
            f"malformed {column} {frame[column].iloc[bad]!r}", file=name, line=bad + 2,
        )
    numbers = parts.astype(np.int64)
    return numbers[0] * 3600 + numbers[1] * 60 + numbers[2]


def _active_services(calendar: pd.DataFrame, service_day: dt.date) -> set:
    weekday = _WEEKDAYS[service_day.weekday()]
    stamp = service_day.strftime("%Y%m%d")
    active = set()
    for index, row in enumerate(calendar.itertuples(index=False)):
        record = row._asdict()
        start, end = str(record["start_date"]).strip(), str(record["end_date"]).strip()
        if len(start) != 8 or len(end) != 8 or not (start.isdigit() and end.isdigit()):
            raise GtfsFeedError("malformed service date range", file="calendar.txt", line=index + 2)
        if start <= stamp <= end and str(record.get(weekday, "0")).strip() == "1":
            active.add(str(record["service_id"]).strip())
    return active


def load_gtfs(feed_directory: Any, service_day: Optional[dt.date] = None) -> RawFeed:
    """Read stops, trips and stop events of the trips running on `service_day`.

    Without a service day, or without calendar.txt, every trip is kept.
    """
    feed_dir = pathlib.Path(feed_directory)
    if not feed_dir.is_dir():
        raise GtfsFeedError(f"feed directory not found: {feed_dir}")
    started = time.perf_counter()
    warnings: List[str] = []

    stops = _read_table(feed_dir, "stops.txt")
    _read_table(feed_dir, "routes.txt")
    trips = _read_table(feed_dir, "trips.txt")
    stop_times = _read_table(feed_dir, "stop_times.txt")
    calendar = _read_table(feed_dir, "calendar.txt", required=False)
    transfers_frame = _read_table(feed_dir, "transfers.txt", required=False)

    stop_ids = [value.strip() for value in stops["stop_id"]]
    lat = pd.to_numeric(stops["stop_lat"], errors="coerce")
    lon = pd.to_numeric(stops["stop_lon"], errors="coerce")
    bad = _first_bad(lat.isna() | lon.isna() | (lat.abs() > 90) | (lon.abs() > 180))
    if bad is not None:
        raise GtfsFeedError(f"malformed coordinates for stop {stop_ids[bad]!r}", file="stops.txt", line=bad + 2)
    duplicate = pd.Series(stop_ids).duplicated()
    bad = _first_bad(duplicate)
    if bad is not None:
        raise GtfsFeedError(f"duplicate stop_id {stop_ids[bad]!r}", file="stops.txt", line=bad + 2)
    coords = np.column_stack((lat.to_numpy(dtype=np.float64), lon.to_numpy(dtype=np.float64)))

    if stop_times.empty:
        raise GtfsFeedError("no stop events", file="stop_times.txt")

    trip_route = dict(zip(trips["trip_id"].str.strip(), trips["route_id"].str.strip()))
    trip_service = dict(zip(trips["trip_id"].str.strip(), trips["service_id"].str.strip()))
    if calendar is not None and service_day is not None:
        active = _active_services(calendar, service_day)
        kept = {trip for trip, service in trip_service.items() if service in active}
        logger.info(
            "calendar_filter service_day=%s trips_total=%d trips_active=%d",
            service_day.isoformat(), len(trip_route), len(kept),
        )
    else:
        kept = set(trip_route)

    frame = stop_times.copy()
    frame["trip_id"] = frame["trip_id"].str.strip()
    frame["stop_id"] = frame["stop_id"].str.strip()
    unknown_trip = _first_bad(~frame["trip_id"].isin(trip_route))
    if unknown_trip is not None:
        raise GtfsFeedError(
            f"unknown trip_id {frame['trip_id'].iloc[unknown_trip]!r}", file="stop_times.txt", line=unknown_trip + 2,
        )
    unknown_stop = _first_bad(~frame["stop_id"].isin(set(stop_ids)))
    if unknown_stop is not None:
        raise GtfsFeedError(
            f"unknown stop_id {frame['stop_id'].iloc[unknown_stop]!r}", file="stop_times.txt", line=unknown_stop + 2,
        )
    sequence = pd.to_numeric(frame["stop_sequence"], errors="coerce")
    bad = _first_bad(sequence.isna())
    if bad is not None:
        raise GtfsFeedError("malformed stop_sequence", file="stop_times.txt", line=bad + 2)

    # An empty arrival or departure borrows the other one.
    frame["arrival_time"] = frame["arrival_time"].where(frame["arrival_time"].str.strip() != "", frame["departure_time"])
    frame["departure_time"] = frame["departure_time"].where(frame["departure_time"].str.strip() != "", frame["arrival_time"])
    frame["arr"] = _parse_time_column(frame, "arrival_time", "stop_times.txt")
    frame["dep"] = _parse_time_column(frame, "departure_time", "stop_times.txt")
    frame["seq"] = sequence.astype(np.int64)
    frame = frame[frame["trip_id"].isin(kept)].sort_values(["trip_id", "seq"], kind="stable")

    raw_trips: List[RawTrip] = []
    for trip_id, group in frame.groupby("trip_id", sort=True):
        arr = tuple(int(x) for x in group["arr"])
        dep = tuple(int(x) for x in group["dep"])
        if len(arr) < 2:
            _warn(warnings, f"trip_dropped trip={trip_id} reason=fewer_than_2_stop_events")
            continue
        if any(d < a for a, d in zip(arr, dep)) or any(arr[i + 1] < dep[i] for i in range(len(arr) - 1)):
            _warn(warnings, f"trip_dropped trip={trip_id} reason=decreasing_times")
            continue
        raw_trips.append(
            RawTrip(
                gtfs_id=str(trip_id),
                route_id=trip_route[trip_id],
                stops=tuple(group["stop_id"]),
                arr=arr,
                dep=dep,
            )
        )

    transfers: Optional[List[Tuple[str, str, int]]] = None
    if transfers_frame is not None:
        transfers = []
        known = set(stop_ids)
        minimum = transfers_frame.get("min_transfer_time", pd.Series([""] * len(transfers_frame)))
        for index, (src, dst, raw_min) in enumerate(
            zip(transfers_frame["from_stop_id"], transfers_frame["to_stop_id"], minimum)
        ):
            src, dst = src.strip(), dst.strip()
            if src not in known or dst not in known:
                raise GtfsFeedError("transfer references an unknown stop", file="transfers.txt", line=index + 2)
            if src == dst:
                continue
            raw_min = str(raw_min).strip()
            if raw_min and not raw_min.isdigit():
                raise GtfsFeedError(f"malformed min_transfer_time {raw_min!r}", file="transfers.txt", line=index + 2)
            transfers.append((src, dst, int(raw_min or 0)))

    logger.info(
        "gtfs_loaded dir=%s stops=%d trips=%d dropped=%d elapsed=%.3fs",
        feed_dir, len(stop_ids), len(raw_trips), len(warnings), time.perf_counter() - started,
    )
    return RawFeed(stop_ids=stop_ids, coords=coords, trips=raw_trips, transfers=transfers, warnings=warnings)


def canonicalize_routes(trips: Iterable[RawTrip]) -> List[CanonicalRoute]:
    """Group trips by exact stop sequence; GTFS route_id is ignored.

    Routes are ordered by their earliest trip (first departure, then trip id),
    trips within a route by first departure, arrival times and trip id.
    """
    ordered = sorted(trips, key=lambda trip: (trip.dep[0], trip.gtfs_id))
    by_sequence: Dict[Tuple[str, ...], CanonicalRoute] = {}
    for trip in ordered:
        route = by_sequence.get(trip.stops)
        if route is None:
            route = by_sequence[trip.stops] = CanonicalRoute(stops=trip.stops, trips=[])
        route.trips.append(trip)
    routes = list(by_sequence.values())
    for route in routes:
        route.trips.sort(key=lambda trip: (trip.dep[0], trip.arr, trip.gtfs_id))
    return routes


def remove_overtaking_trips(
    routes: Sequence[CanonicalRoute], warnings: Optional[List[str]] = None,
) -> List[CanonicalRoute]:
    """Greedy keep-first: drop a trip that is earlier than the last kept trip at any stop."""
    result: List[CanonicalRoute] = []
    for route in routes:
        kept: List[RawTrip] = []
        for trip in route.trips:
            if kept:
                last = kept[-1]
                if any(a < b for a, b in zip(trip.arr, last.arr)) or any(a < b for a, b in zip(trip.dep, last.dep)):
                    message = f"trip_dropped trip={trip.gtfs_id} reason=overtaking after={last.gtfs_id}"
                    if warnings is not None:
                        _warn(warnings, message)
                    else:
                        logger.warning(message)
                    continue
            kept.append(trip)
        result.append(CanonicalRoute(stops=route.stops, trips=kept))
    return result


def build_timetable(
    raw: RawFeed,
    walk_threshold_s: int = WALK_THRESHOLD_S,
    walk_speed_mps: float = WALK_SPEED_MPS,
    component_cap: int = FOOTPATH_COMPONENT_CAP,
) -> Tuple[Timetable, Dict[str, Any]]:
    """Assemble the timetable and a stats dict (counts plus cleanup tallies)."""
    warnings = list(raw.warnings)
    routes = remove_overtaking_trips(canonicalize_routes(raw.trips), warnings)
    routes = [route for route in routes if route.trips]

    # Closure runs over all stops, before unserved stops are dropped.
    raw_index = {stop: index for index, stop in enumerate(raw.stop_ids)}
    if raw.transfers is not None:
        pairs = [(raw_index[a], raw_index[b], duration) for a, b, duration in raw.transfers]
        closed, adjusted = close_footpaths(len(raw.stop_ids), pairs, cap=component_cap)
        footpath_source = "transfers.txt"
    else:
        closed, adjusted = build_footpaths(raw.coords, walk_threshold_s, walk_speed_mps, cap=component_cap)
        footpath_source = "coordinates"

    served = {stop for route in routes for stop in route.stops}
    keep = [index for index, stop in enumerate(raw.stop_ids) if stop in served]
    dropped_stops = len(raw.stop_ids) - len(keep)
    if dropped_stops:
        _warn(warnings, f"stops_dropped count={dropped_stops} reason=not_served_by_any_trip")
    stop_ids = [raw.stop_ids[index] for index in keep]
    coords = raw.coords[keep] if keep else np.zeros((0, 2))
    index_of = {stop: index for index, stop in enumerate(stop_ids)}
    renumber = {old: new for new, old in enumerate(keep)}
    footpaths = FootpathGraph.from_pairs(
        len(stop_ids),
        [(renumber[a], renumber[b], d) for a, b, d in closed.pairs() if a in renumber and b in renumber],
    )

    tt = Timetable.assemble(
        stop_ids=stop_ids,
        coords=coords,
        route_stops=[tuple(index_of[stop] for stop in route.stops) for route in routes],
        route_trips=[[(trip.gtfs_id, trip.arr, trip.dep) for trip in route.trips] for route in routes],
        footpaths=footpaths,
    )
    stats: Dict[str, Any] = dict(tt.describe())
    stats.update(
        {
            "dropped_trips": sum(1 for w in warnings if w.startswith("trip_dropped")),
            "dropped_stops": dropped_stops,
            "footpath_source": footpath_source,
            "footpaths_adjusted": adjusted,
            "warnings": warnings,
        }
    )
    logger.info(
        "timetable_built stops=%d routes=%d trips=%d footpaths=%d",
        tt.n_stops, tt.n_routes, tt.n_trips, len(tt.footpaths),
    )
    return tt, stats


def _find_feed_root(directory: pathlib.Path) -> pathlib.Path:
    if (directory / "stops.txt").is_file():
        return directory
    for child in sorted(directory.iterdir()):
        if child.is_dir() and (child / "stops.txt").is_file():
            return child
    return directory


def download_feed(url: str, destination: Any, timeout: float = 120.0) -> pathlib.Path:
    """Download a zipped GTFS feed and unpack it; returns the directory holding stops.txt."""
    target = pathlib.Path(destination)
    target.mkdir(parents=True, exist_ok=True)
    payload = b""
    with httpx.Client(follow_redirects=True, timeout=timeout, headers={"User-Agent": USER_AGENT}) as client:
        for attempt in range(_MAX_DOWNLOAD_ATTEMPTS):
            try:
                response = client.get(url)
                response.raise_for_status()
                payload = response.content
                break
            except httpx.HTTPStatusError as exc:
                raise GtfsFeedError(f"feed download failed with HTTP {exc.response.status_code}") from exc
            except httpx.TransportError as exc:
                if attempt + 1 >= _MAX_DOWNLOAD_ATTEMPTS:
                    raise GtfsFeedError(f"feed download failed: {type(exc).__name__}") from exc
                delay = min(8.0, 2.0 ** attempt)
                logger.warning("feed_download_retry url=%s attempt=%d delay=%.1fs", url, attempt + 1, delay)
                time.sleep(delay)
    try:
        with zipfile.ZipFile(io.BytesIO(payload)) as archive:
            archive.extractall(target)
    except zipfile.BadZipFile as exc:
        raise GtfsFeedError(f"downloaded feed is not a zip archive: {url}") from exc
    root = _find_feed_root(target)
    logger.info("feed_downloaded url=%s bytes=%d dir=%s", url, len(payload), root)
    return root


def write_feed(
    directory: Any,
    stops: pd.DataFrame,
    trips: pd.DataFrame,
    stop_times: pd.DataFrame,
    transfers: Optional[pd.DataFrame] = None,
) -> pathlib.Path:
    """Write a minimal GTFS directory; routes.txt is derived from the trips."""
    target = pathlib.Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    routes = pd.DataFrame({"route_id": sorted(trips["route_id"].unique())})
    routes["route_type"] = 3
    tables = {"stops.txt": stops, "routes.txt": routes, "trips.txt": trips, "stop_times.txt": stop_times}
    if transfers is not None:
        tables["transfers.txt"] = transfers
    for name, frame in tables.items():
        frame.to_csv(target / name, index=False, lineterminator="\n", float_format="%.6f")
    logger.debug("feed_written dir=%s trips=%d", target, len(trips))
    return target
