# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Exception hierarchy and the JSON error envelope used by the CLI and MCP tools."""

import json
from typing import Any, Dict, Optional


class HypTransitError(Exception):
    """Base error type surfaced as a structured error envelope."""

    def details(self) -> Dict[str, Any]:
        return {}


class GtfsFeedError(HypTransitError):
    """Missing or malformed GTFS input."""

    def __init__(self, message: str, file: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.file = file
        self.line = line

    def details(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {}
        if self.file:
            payload["file"] = self.file
        if self.line is not None:
            payload["line"] = self.line
        return payload


class TimetableError(HypTransitError):
    """A timetable violates one of its structural invariants."""


class FootpathError(HypTransitError):
    """Footpath closure cannot be built (component cap exceeded, bad durations)."""


class UnknownStopError(HypTransitError, KeyError):
    """A stop id or index that the timetable does not contain."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown stop"


class SnapshotFormatError(HypTransitError):
    """A binary snapshot or transfer file with a bad header or truncated body."""


class PartitionError(HypTransitError):
    """Invalid partitioning request."""


class InfeasiblePartitionError(PartitionError):
    """Balance or bound constraints admit no assignment."""


class LayoutMismatchError(HypTransitError):
    """A partition layout or fill-in does not belong to the timetable in use."""


def error_payload(exc: BaseException) -> Dict[str, Any]:
    """Render an exception as the `{"error": {...}}` envelope."""
    body: Dict[str, Any] = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, HypTransitError):
        body.update(exc.details())
    return {"error": body}


def error_json(exc: BaseException) -> str:
    return json.dumps(error_payload(exc), indent=2)
