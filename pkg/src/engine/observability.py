"""Structured event logging for harness runs."""
from __future__ import annotations

import json
import logging
import uuid
from typing import Any, Optional

from rich.console import Console
from rich.logging import RichHandler

logger = logging.getLogger("observability")


def log_event(event: str, payload: dict[str, Any], run_id: Optional[str] = None) -> None:
    if run_id:
        payload = dict(payload)
        payload["run_id"] = run_id
    logger.info("event=%s payload=%s", event, json.dumps(payload, sort_keys=True))


def generate_run_id() -> str:
    return uuid.uuid4().hex


def configure_logging(level: str) -> None:
    """Route all loggers to stderr through rich; stdout stays free for results."""
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
