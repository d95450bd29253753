# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Shared constants for hyptransit runtime configuration."""

import os
from typing import Optional


def _normalize_int(raw_value: Optional[str], default: int, minimum: int = 0) -> int:
    """Parse a non-negative integer setting, with safe fallback."""
    if raw_value is None:
        return default

    candidate = raw_value.strip()
    if not candidate:
        return default

    try:
        value = int(candidate)
    except ValueError:
        return default

    if value < minimum:
        return default
    return value


def _normalize_float(raw_value: Optional[str], default: float, low: float, high: float) -> float:
    """Parse a float setting inside (low, high], with safe fallback."""
    if raw_value is None:
        return default

    candidate = raw_value.strip()
    if not candidate:
        return default

    try:
        value = float(candidate)
    except ValueError:
        return default

    if not (low < value <= high):
        return default
    return value


MAX_TRANSFERS = _normalize_int(os.environ.get("HYPTRANSIT_MAX_TRANSFERS"), 4)
WALK_SPEED_MPS = _normalize_float(os.environ.get("HYPTRANSIT_WALK_SPEED_MPS"), 1.0, 0.0, 10.0)
WALK_THRESHOLD_S = _normalize_int(os.environ.get("HYPTRANSIT_WALK_THRESHOLD_S"), 180, minimum=1)
FOOTPATH_COMPONENT_CAP = _normalize_int(os.environ.get("HYPTRANSIT_FOOTPATH_COMPONENT_CAP"), 300, minimum=2)
PARTITION_EPSILON = _normalize_float(os.environ.get("HYPTRANSIT_EPSILON"), 0.2, 0.0, 0.999)
QUERY_HORIZON_S = _normalize_int(os.environ.get("HYPTRANSIT_QUERY_HORIZON_S"), 86400, minimum=1)
JOURNEY_CAP = _normalize_int(os.environ.get("HYPTRANSIT_JOURNEY_CAP"), 64, minimum=1)

# Branch-and-bound partitioning is an oracle for tiny hypergraphs only.
EXACT_PARTITION_MAX_NODES = 25
FM_PASS_LIMIT = 16
