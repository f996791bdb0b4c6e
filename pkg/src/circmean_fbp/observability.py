"""Structured logging and prometheus metrics for pipeline runs."""
from __future__ import annotations

import json
import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

PACKAGE_LOGGER = "circmean_fbp"

DEFAULT_RECORD_FIELDS = {
    "name",
    "msg",
    "args",
    "levelname",
    "levelno",
    "pathname",
    "filename",
    "module",
    "exc_info",
    "exc_text",
    "stack_info",
    "lineno",
    "funcName",
    "created",
    "msecs",
    "relativeCreated",
    "thread",
    "threadName",
    "processName",
    "process",
    "taskName",
}


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:  # noqa: D401 - simple convenience override
        payload: dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)

        for key, value in record.__dict__.items():
            if key not in DEFAULT_RECORD_FIELDS and key not in payload:
                payload[key] = value

        return json.dumps(payload, default=str)


def configure_logging(level: str = "INFO", json_lines: bool = True) -> logging.Logger:
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level.upper())

    # stderr keeps stdout free for metrics / tables
    handler = logging.StreamHandler()
    if json_lines:
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))

    logger.handlers.clear()
    logger.addHandler(handler)
    logger.propagate = False
    return logger


REGISTRY = CollectorRegistry()

STAGE_SECONDS = Histogram(
    "circmean_fbp_stage_seconds",
    "Wall time spent in a pipeline stage",
    labelnames=("stage",),
    buckets=(0.01, 0.05, 0.1, 0.5, 1, 2, 5, 10, 30, 60, 120),
    registry=REGISTRY,
)

RUN_COUNTER = Counter(
    "circmean_fbp_runs_total",
    "Count of CLI commands by result",
    labelnames=("command", "result"),
    registry=REGISTRY,
)


@contextmanager
def timed_stage(stage: str, logger: logging.Logger | None = None, **extra: Any) -> Iterator[None]:
    """Observe the wall time of a block on STAGE_SECONDS and log it at DEBUG."""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        STAGE_SECONDS.labels(stage=stage).observe(elapsed)
        if logger is not None:
            logger.debug("stage finished", extra={"stage": stage, "seconds": round(elapsed, 6), **extra})


def write_metrics(path: str) -> None:
    write_to_textfile(path, REGISTRY)
