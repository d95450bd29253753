# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import io
import os
import sys
import zipfile
from pathlib import Path

import httpx
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit._version import __version__
from hyptransit.core import gtfs_feed, log_helpers
from hyptransit.core.errors import GtfsFeedError
from hyptransit.core.gtfs_feed import build_timetable, download_feed, load_gtfs
from hyptransit.core.log_helpers import USER_AGENT

TOY_FEED = Path(__file__).resolve().parent / "fixtures" / "toy_feed"


def _zipped_toy(prefix: str = "") -> bytes:
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as archive:
        for path in sorted(TOY_FEED.glob("*.txt")):
            archive.write(path, prefix + path.name)
    return buffer.getvalue()


def _patch_transport(monkeypatch, handler):
    real_client = httpx.Client

    def client_factory(*args, **kwargs):
        kwargs["transport"] = httpx.MockTransport(handler)
        return real_client(*args, **kwargs)

    monkeypatch.setattr(gtfs_feed.httpx, "Client", client_factory)
    monkeypatch.setattr(gtfs_feed.time, "sleep", lambda _: None)


def test_download_unpacks_nested_feed(monkeypatch, tmp_path):
    payload = _zipped_toy("gtfs/")
    _patch_transport(monkeypatch, lambda request: httpx.Response(200, content=payload))

    root = download_feed("https://feeds.test/toy.zip", tmp_path / "feed")

    assert root == tmp_path / "feed" / "gtfs"
    tt, _ = build_timetable(load_gtfs(root))
    assert tt.n_routes == 5


def test_download_retries_transport_errors(monkeypatch, tmp_path):
    calls = {"count": 0}
    payload = _zipped_toy()

    def handler(request):
        calls["count"] += 1
        if calls["count"] == 1:
            raise httpx.ConnectError("refused", request=request)
        return httpx.Response(200, content=payload)

    _patch_transport(monkeypatch, handler)
    root = download_feed("https://feeds.test/toy.zip", tmp_path)

    assert calls["count"] == 2
    assert (root / "stops.txt").is_file()


def test_download_http_error_is_feed_error(monkeypatch, tmp_path):
    _patch_transport(monkeypatch, lambda request: httpx.Response(404))
    with pytest.raises(GtfsFeedError, match="HTTP 404"):
        download_feed("https://feeds.test/missing.zip", tmp_path)


def test_download_rejects_non_zip(monkeypatch, tmp_path):
    _patch_transport(monkeypatch, lambda request: httpx.Response(200, content=b"<html></html>"))
    with pytest.raises(GtfsFeedError, match="not a zip"):
        download_feed("https://feeds.test/page", tmp_path)


@pytest.mark.e2e
def test_real_feed_download(tmp_path):
    url = os.environ.get("HYPTRANSIT_E2E_FEED_URL", "").strip()
    if not url:
        pytest.skip("HYPTRANSIT_E2E_FEED_URL is not set")
    root = download_feed(url, tmp_path)
    tt, stats = build_timetable(load_gtfs(root))
    assert tt.n_trips > 0
    assert stats["footpath_source"] in ("transfers.txt", "coordinates")


def test_download_identifies_the_client(monkeypatch, tmp_path):
    seen = {}
    payload = _zipped_toy()

    def handler(request):
        seen["agent"] = request.headers["user-agent"]
        return httpx.Response(200, content=payload)

    _patch_transport(monkeypatch, handler)
    download_feed("https://feeds.test/toy.zip", tmp_path)

    assert seen["agent"] == USER_AGENT == f"hyptransit/{__version__}"
    assert not hasattr(log_helpers, "PACKAGE_BANNER")
