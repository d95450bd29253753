# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Binary snapshot files and their JSON stats sidecars.

TTBL (timetable) layout, little endian::

    magic  b"TTBL"
    u32    format version
    then sections, each: 4-byte tag, u64 payload length, payload
      STID  stop ids, UTF-8, NUL separated
      COOR  float64[n_stops, 2] (lat, lon)
      ROUT  int64: n_routes, then per route: n_stops, stops..., n_trips
      TRID  trip ids in dense order, UTF-8, NUL separated
      TIME  int64: per route, per trip, arrivals then departures
      FOOT  int64[k, 3] footpath pairs (a < b, duration)

TTRS (trip transfers) layout::

    magic  b"TTRS"
    u32    format version
    u32    stage (0 generated, 1 uturn_free, 2 reduced)
    u64    trip count
    u32    transfer count per trip
    then, concatenated in trip order, three int32 columns:
      from_index, to_trip - from_trip, to_index
"""

import json
import pathlib
import struct
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from .errors import SnapshotFormatError
from .log_helpers import logger
from .timetable import FootpathGraph, Timetable
from .transfer_set import STAGES, TransferSet

TIMETABLE_MAGIC = b"TTBL"
TRANSFERS_MAGIC = b"TTRS"
FORMAT_VERSION = 1
_SECTIONS = ("STID", "COOR", "ROUT", "TRID", "TIME", "FOOT")


def sidecar_path(path: Any) -> pathlib.Path:
    path = pathlib.Path(path)
    return path.with_name(path.name + ".stats.json")


def write_sidecar(path: Any, stats: Dict[str, Any]) -> pathlib.Path:
    target = sidecar_path(path)
    target.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def read_sidecar(path: Any) -> Dict[str, Any]:
    target = sidecar_path(path)
    if not target.is_file():
        return {}
    return json.loads(target.read_text(encoding="utf-8"))


def _pack_strings(values) -> bytes:
    return "\x00".join(values).encode("utf-8")


def _unpack_strings(payload: bytes, count: int) -> List[str]:
    if count == 0:
        return []
    values = payload.decode("utf-8").split("\x00")
    if len(values) != count:
        raise SnapshotFormatError(f"expected {count} identifiers, found {len(values)}")
    return values


def write_timetable(tt: Timetable, path: Any, stats: Optional[Dict[str, Any]] = None) -> pathlib.Path:
    """Write a TTBL snapshot plus its stats sidecar."""
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)

    layout: List[int] = [tt.n_routes]
    times: List[np.ndarray] = []
    for route in tt.routes:
        layout.append(len(route))
        layout.extend(route.stops)
        layout.append(route.n_trips)
        times.append(np.concatenate((route.arrivals, route.departures), axis=1).ravel())
    pairs = np.asarray(tt.footpaths.pairs(), dtype=np.int64).reshape(-1, 3)

    sections = {
        "STID": _pack_strings(tt.stop_ids),
        "COOR": np.ascontiguousarray(tt.coords, dtype="<f8").tobytes(),
        "ROUT": np.asarray(layout, dtype="<i8").tobytes(),
        "TRID": _pack_strings(trip.gtfs_id for trip in tt.trips),
        "TIME": (np.concatenate(times) if times else np.zeros(0)).astype("<i8").tobytes(),
        "FOOT": pairs.astype("<i8").tobytes(),
    }
    with target.open("wb") as handle:
        handle.write(TIMETABLE_MAGIC)
        handle.write(struct.pack("<I", FORMAT_VERSION))
        for tag in _SECTIONS:
            payload = sections[tag]
            handle.write(tag.encode("ascii"))
            handle.write(struct.pack("<Q", len(payload)))
            handle.write(payload)

    sidecar = dict(tt.describe())
    if stats:
        sidecar.update({key: value for key, value in stats.items() if key != "warnings"})
    write_sidecar(target, sidecar)
    logger.info("snapshot_written path=%s bytes=%d", target, target.stat().st_size)
    return target


def _read_header(blob: bytes, magic: bytes) -> int:
    if len(blob) < 8 or blob[:4] != magic:
        raise SnapshotFormatError(f"not a {magic.decode()} file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise SnapshotFormatError(f"unsupported {magic.decode()} version {version}")
    return 8


def _iter_sections(blob: bytes, offset: int) -> Iterator[Tuple[str, bytes]]:
    while offset < len(blob):
        if offset + 12 > len(blob):
            raise SnapshotFormatError("truncated section header")
        tag = blob[offset:offset + 4].decode("ascii", errors="replace")
        (length,) = struct.unpack_from("<Q", blob, offset + 4)
        start = offset + 12
        if start + length > len(blob):
            raise SnapshotFormatError(f"truncated section {tag}")
        yield tag, blob[start:start + length]
        offset = start + length


def read_timetable(path: Any) -> Timetable:
    """Load a TTBL snapshot written by `write_timetable`."""
    source = pathlib.Path(path)
    if not source.is_file():
        raise SnapshotFormatError(f"snapshot not found: {source}")
    blob = source.read_bytes()
    sections = dict(_iter_sections(blob, _read_header(blob, TIMETABLE_MAGIC)))
    missing = [tag for tag in _SECTIONS if tag not in sections]
    if missing:
        raise SnapshotFormatError(f"snapshot lacks sections {missing}")

    coords = np.frombuffer(sections["COOR"], dtype="<f8").reshape(-1, 2)
    stop_ids = _unpack_strings(sections["STID"], coords.shape[0])
    layout = np.frombuffer(sections["ROUT"], dtype="<i8")
    times = np.frombuffer(sections["TIME"], dtype="<i8")
    foot = np.frombuffer(sections["FOOT"], dtype="<i8").reshape(-1, 3)

    route_stops: List[Tuple[int, ...]] = []
    shapes: List[Tuple[int, int]] = []
    try:
        cursor = 1
        for _ in range(int(layout[0])):
            length = int(layout[cursor])
            route_stops.append(tuple(int(s) for s in layout[cursor + 1:cursor + 1 + length]))
            n_trips = int(layout[cursor + 1 + length])
            shapes.append((n_trips, length))
            cursor += length + 2
    except IndexError as exc:
        raise SnapshotFormatError("truncated route table") from exc

    total_trips = sum(n for n, _ in shapes)
    trip_ids = _unpack_strings(sections["TRID"], total_trips)
    if times.shape[0] != sum(2 * n * length for n, length in shapes):
        raise SnapshotFormatError("time table size does not match the route table")

    route_trips = []
    time_cursor = 0
    trip_cursor = 0
    for n_trips, length in shapes:
        block = times[time_cursor:time_cursor + 2 * n_trips * length].reshape(n_trips, 2 * length)
        rows = [
            (trip_ids[trip_cursor + position], block[position, :length], block[position, length:])
            for position in range(n_trips)
        ]
        route_trips.append(rows)
        time_cursor += 2 * n_trips * length
        trip_cursor += n_trips

    footpaths = FootpathGraph.from_pairs(len(stop_ids), (tuple(int(x) for x in row) for row in foot))
    tt = Timetable.assemble(stop_ids, coords, route_stops, route_trips, footpaths)
    logger.debug("snapshot_loaded path=%s stops=%d trips=%d", source, tt.n_stops, tt.n_trips)
    return tt


def write_transfers(transfers: TransferSet, path: Any, stats: Optional[Dict[str, Any]] = None) -> pathlib.Path:
    """Write a TTRS file; identical sets produce identical bytes."""
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    counts = np.diff(transfers.offsets).astype("<u4")
    from_trip = np.repeat(np.arange(transfers.n_trips, dtype=np.int64), np.diff(transfers.offsets))
    delta = (transfers.to_trip.astype(np.int64) - from_trip).astype("<i4")
    with target.open("wb") as handle:
        handle.write(TRANSFERS_MAGIC)
        handle.write(struct.pack("<IIQ", FORMAT_VERSION, STAGES.index(transfers.stage), transfers.n_trips))
        handle.write(counts.tobytes())
        handle.write(transfers.from_index.astype("<i4").tobytes())
        handle.write(delta.tobytes())
        handle.write(transfers.to_index.astype("<i4").tobytes())
    sidecar = {"stage": transfers.stage, "trips": transfers.n_trips, "transfers": len(transfers)}
    if stats:
        sidecar.update(stats)
    write_sidecar(target, sidecar)
    logger.info("transfers_written path=%s stage=%s transfers=%d", target, transfers.stage, len(transfers))
    return target


def read_transfers(path: Any, expected_trips: Optional[int] = None) -> TransferSet:
    source = pathlib.Path(path)
    if not source.is_file():
        raise SnapshotFormatError(f"transfer file not found: {source}")
    blob = source.read_bytes()
    offset = _read_header(blob, TRANSFERS_MAGIC)
    if len(blob) < offset + 12:
        raise SnapshotFormatError("truncated TTRS header")
    stage_code, n_trips = struct.unpack_from("<IQ", blob, offset)
    offset += 12
    if stage_code >= len(STAGES):
        raise SnapshotFormatError(f"unknown transfer stage code {stage_code}")
    if expected_trips is not None and n_trips != expected_trips:
        raise SnapshotFormatError(f"transfer file covers {n_trips} trips, timetable has {expected_trips}")
    if len(blob) < offset + 4 * n_trips:
        raise SnapshotFormatError("truncated TTRS trip counts")
    counts = np.frombuffer(blob, dtype="<u4", count=n_trips, offset=offset).astype(np.int64)
    offset += 4 * n_trips
    total = int(counts.sum())
    if len(blob) != offset + 12 * total:
        raise SnapshotFormatError("TTRS body size does not match its trip counts")
    columns = [
        np.frombuffer(blob, dtype="<i4", count=total, offset=offset + 4 * total * c).astype(np.int32)
        for c in range(3)
    ]
    offsets = np.zeros(n_trips + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    from_trip = np.repeat(np.arange(n_trips, dtype=np.int64), counts)
    to_trip = (columns[1].astype(np.int64) + from_trip).astype(np.int32)
    return TransferSet(offsets, columns[0], to_trip, columns[2], STAGES[stage_code])
