# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Process bootstrap entrypoints for hyptransit."""

from hyptransit.core.mcp_runtime import main as _main


def run() -> int:
    """Run the hyptransit command line."""
    return _main()
