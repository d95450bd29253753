# Copyright (C) 2025 ArmaVita LLC
# SPDX-License-Identifier: AGPL-3.0-only

"""Package logger shared by every hyptransit module."""

import logging
import os
import pathlib
import platform
import sys
import time
from typing import Iterator, Optional

from .._version import __version__

PACKAGE_NAME = "hyptransit"
LOGGER_NAME = "hyptransit"
USER_AGENT = f"{PACKAGE_NAME}/{__version__}"

_LEVELS = {"DEBUG": logging.DEBUG, "INFO": logging.INFO, "WARNING": logging.WARNING, "ERROR": logging.ERROR}


def _resolve_log_file() -> pathlib.Path:
    """Return a writable per-user log file path across OSes."""
    system_name = platform.system().lower()
    if system_name == "windows":
        root = pathlib.Path(os.environ.get("APPDATA") or pathlib.Path.home())
    elif system_name == "darwin":
        root = pathlib.Path.home() / "Library" / "Application Support"
    else:
        root = pathlib.Path.home() / ".config"

    log_dir = root / PACKAGE_NAME
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir / "hyptransit.log"


def _create_logger() -> logging.Logger:
    logger = logging.getLogger(LOGGER_NAME)
    if logger.handlers:
        return logger

    level_name = os.environ.get("HYPTRANSIT_LOG_LEVEL", "INFO").strip().upper()
    logger.setLevel(_LEVELS.get(level_name, logging.INFO))
    try:
        handler: logging.Handler = logging.FileHandler(_resolve_log_file(), encoding="utf-8")
    except OSError:
        handler = logging.StreamHandler(sys.stderr)
    formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s")
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.propagate = False

    logger.info("logger_initialized version=%s", __version__)
    return logger


logger = _create_logger()


def progress_steps(label: str, total: int, steps: int = 10, every: Optional[int] = None) -> Iterator[int]:
    """Yield 0..total-1 and log a progress line roughly `steps` times.

    Long preprocessing loops (transfer generation, fill-in workloads) use this
    instead of bare ranges so the log shows how far a run got.
    """
    if total <= 0:
        return
    step = every or max(1, total // max(1, steps))
    started = time.perf_counter()
    for index in range(total):
        if index and index % step == 0:
            logger.debug(
                "%s_progress done=%d total=%d elapsed=%.2fs",
                label, index, total, time.perf_counter() - started,
            )
        yield index
