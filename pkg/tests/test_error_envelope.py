# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core.errors import GtfsFeedError, PartitionError, UnknownStopError, error_json, error_payload
from hyptransit.core.routing_tools import clear_cache, describe_timetable, plan_journeys, profile_journeys
from hyptransit.core.snapshot_io import write_timetable


@pytest.fixture
def snapshot(toy, tmp_path):
    clear_cache()
    return str(write_timetable(toy, tmp_path / "toy.ttbl"))


def test_feed_error_carries_location():
    payload = error_payload(GtfsFeedError("bad time", file="stop_times.txt", line=12))
    assert payload == {"error": {"type": "GtfsFeedError", "message": "bad time", "file": "stop_times.txt", "line": 12}}


def test_plain_exceptions_render_type_and_message():
    assert json.loads(error_json(ValueError("nope"))) == {"error": {"type": "ValueError", "message": "nope"}}
    assert error_payload(PartitionError("p must be >= 1"))["error"]["type"] == "PartitionError"
    assert str(UnknownStopError("unknown stop 'x'")) == "unknown stop 'x'"


@pytest.mark.asyncio
async def test_unknown_stop_returns_error_json(snapshot):
    raw = await plan_journeys(snapshot_path=snapshot, origin="nowhere", destination="sd", departure="08:00:00")
    payload = json.loads(raw)
    assert payload["error"]["type"] == "UnknownStopError"


@pytest.mark.asyncio
async def test_missing_snapshot_returns_error_json(tmp_path):
    raw = await describe_timetable(snapshot_path=str(tmp_path / "missing.ttbl"))
    assert "error" in json.loads(raw)


@pytest.mark.asyncio
async def test_tbtr_without_transfers_returns_error_json(snapshot):
    raw = await plan_journeys(snapshot_path=snapshot, origin="s0", destination="sd",
                              departure="08:00:00", engine="tbtr")
    payload = json.loads(raw)
    assert payload["error"]["type"] == "ValueError"
    assert "transfers_path" in payload["error"]["message"]


@pytest.mark.asyncio
async def test_unknown_engine_returns_error_json(snapshot):
    raw = await profile_journeys(snapshot_path=snapshot, origin="s0", destinations=["sd"], engine="dijkstra")
    assert "unknown engine" in json.loads(raw)["error"]["message"]
