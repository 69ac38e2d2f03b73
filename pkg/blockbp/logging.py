"""
Logging configuration for blockbp.

Provides a consistent loguru logger across all modules, plus an opt-in
JSON-lines sink for per-round message-passing records.
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Optional

from loguru import logger


# Default log directory, overridable through BLOCKBP_LOG_DIR
LOG_DIR = Path(os.environ.get('BLOCKBP_LOG_DIR', './logs'))

ROUND_RECORD = 'round'


def setup_logging(log_dir: Path | None = None) -> Any:
    """Set up the rotating loguru file sink.

    Args:
        log_dir: Directory for log files. Defaults to LOG_DIR

    Returns:
        The configured loguru logger
    """
    if log_dir is None:
        log_dir = LOG_DIR

    log_dir.mkdir(parents=True, exist_ok=True)
    log_path = log_dir / 'blockbp.log'

    logger.remove()
    logger.add(
        log_path,
        rotation='5 MB',
        retention='30 days',
        compression='gz',
        format='{time:YYYY-MM-DD HH:mm:ss} | {level:<8} | {name}:{function}:{line} | {message}',
        level='DEBUG',
        filter=lambda record: record['extra'].get('record_type') != ROUND_RECORD,
    )
    return logger


setup_logging()

_round_sink: Optional[int] = None


def enable_round_log(path: Path) -> None:
    """Write one JSON line per message-passing round to ``path``."""
    global _round_sink
    disable_round_log()
    path.parent.mkdir(parents=True, exist_ok=True)
    _round_sink = logger.add(
        path,
        serialize=True,
        level='INFO',
        filter=lambda record: record['extra'].get('record_type') == ROUND_RECORD,
    )


def disable_round_log() -> None:
    """Remove the JSON-lines round sink if one is installed."""
    global _round_sink
    if _round_sink is not None:
        logger.remove(_round_sink)
        _round_sink = None


def log_round(**fields: Any) -> None:
    """Emit a structured per-round record (round, eps, ratio, block times)."""
    logger.bind(record_type=ROUND_RECORD, **fields).info('round {}', fields.get('round'))
