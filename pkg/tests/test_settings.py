# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hyptransit.core import settings
from hyptransit.core.settings import _normalize_float, _normalize_int


@pytest.mark.parametrize("raw,expected", [(None, 4), ("", 4), ("  ", 4), ("7", 7), (" 2 ", 2), ("x", 4), ("-1", 4)])
def test_normalize_int(raw, expected):
    assert _normalize_int(raw, 4) == expected


def test_normalize_int_minimum():
    assert _normalize_int("1", 180, minimum=1) == 1
    assert _normalize_int("0", 180, minimum=1) == 180


@pytest.mark.parametrize("raw,expected", [(None, 0.2), ("0.5", 0.5), ("0", 0.2), ("1.0", 0.2), ("abc", 0.2)])
def test_normalize_float(raw, expected):
    assert _normalize_float(raw, 0.2, 0.0, 0.999) == expected


def test_defaults_are_sane():
    assert settings.MAX_TRANSFERS >= 0
    assert 0.0 < settings.PARTITION_EPSILON < 1.0
    assert settings.WALK_THRESHOLD_S >= 1
    assert settings.FOOTPATH_COMPONENT_CAP >= 2
    assert settings.EXACT_PARTITION_MAX_NODES == 25
