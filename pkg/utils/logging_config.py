"""
Logging setup shared by the command line and the MCP server.

Log lines go to stderr as key=value pairs. Each CLI command and each MCP tool
call runs inside `correlation()`, so every line the parser, verifier and
interpreter write on its behalf carries the same correlation_id.
"""

import json
import logging
import sys
import uuid
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime
from typing import Iterator, Optional

_correlation_id: ContextVar[str] = ContextVar("correlation_id", default="-")

QUIET_LIBRARIES = ("lark", "fastmcp")


class CorrelationIdFilter(logging.Filter):
    """Stamp records with the correlation id of the current command or tool call."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "correlation_id"):
            record.correlation_id = _correlation_id.get()
        return True


class StructuredFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        fields = {
            "timestamp": datetime.fromtimestamp(record.created).isoformat(timespec="milliseconds"),
            "level": record.levelname,
            "logger": record.name,
            "correlation_id": getattr(record, "correlation_id", "-"),
            "message": record.getMessage(),
        }
        if record.exc_info:
            fields["exception"] = self.formatException(record.exc_info)
        return " ".join(f"{key}={_quote(value)}" for key, value in fields.items())


def _quote(value: str) -> str:
    # values with blanks or newlines stay on one line, one field each
    text = str(value)
    if not text or any(ch.isspace() or ch in "\"=" for ch in text):
        return json.dumps(text)
    return text


def setup_logging(level: str = "INFO") -> None:
    """
    Route all logging to stderr in key=value form.

    Args:
        level: Logging level name; unknown names fall back to INFO
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(numeric_level)
    handler.setFormatter(StructuredFormatter())
    handler.addFilter(CorrelationIdFilter())

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.handlers.clear()
    root_logger.addHandler(handler)

    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(logging.WARNING)

    logging.debug(f"Logging configured at {level} level")


@contextmanager
def correlation(correlation_id: Optional[str] = None) -> Iterator[str]:
    """
    Tag every log line written inside the block with one correlation id.

    Args:
        correlation_id: Id to use; a fresh one is generated when omitted

    Yields:
        The correlation id in effect
    """
    token = _correlation_id.set(correlation_id or uuid.uuid4().hex[:12])
    try:
        yield _correlation_id.get()
    finally:
        _correlation_id.reset(token)
