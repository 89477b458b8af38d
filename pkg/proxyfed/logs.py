"""
Logging configuration for ProxyFed.

Provides unified logging for all proxyfed.* loggers, either as coloured
human-readable lines or as one JSON object per record.
"""

import json
import logging
import sys

# Attributes every LogRecord carries; anything else was passed via `extra=`.
_RESERVED_ATTRS = {
    "name",
    "msg",
    "args",
    "created",
    "filename",
    "funcName",
    "levelname",
    "levelno",
    "lineno",
    "module",
    "msecs",
    "message",
    "pathname",
    "process",
    "processName",
    "relativeCreated",
    "thread",
    "threadName",
    "taskName",
    "exc_info",
    "exc_text",
    "stack_info",
}


class ProxyFedFormatter(logging.Formatter):
    """Custom formatter for clean, consistent ProxyFed logs with colors."""

    # ANSI color codes
    COLORS = {
        "DEBUG": "\033[36m",  # Cyan
        "INFO": "\033[32m",  # Green
        "WARNING": "\033[33m",  # Yellow
        "ERROR": "\033[31m",  # Red
        "CRITICAL": "\033[1;31m",  # Bold Red
    }
    RESET = "\033[0m"

    def __init__(self, use_color: bool = True):
        super().__init__()
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        # Format: [YYYY-MM-DD HH:MM:SS] – LEVEL – message
        level = record.levelname
        timestamp = self.formatTime(record, "%Y-%m-%d %H:%M:%S")
        message = record.getMessage()

        color = self.COLORS.get(level, "") if self.use_color else ""
        colored_level = f"{color}{level}{self.RESET}" if color else level

        line = f"[{timestamp}] – {colored_level} – {message}"
        if record.exc_info:
            line = f"{line}\n{self.formatException(record.exc_info)}"
        return line


class JSONFormatter(logging.Formatter):
    """JSON formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        # Merge fields passed through `extra=`
        for key, value in record.__dict__.items():
            if key not in _RESERVED_ATTRS and key not in log_data:
                log_data[key] = value

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def setup_logging() -> None:
    """Configure the proxyfed logger from process settings."""
    from proxyfed.config import settings

    config = settings()

    if config.log_format == "json":
        formatter: logging.Formatter = JSONFormatter()
    else:
        formatter = ProxyFedFormatter(use_color=sys.stderr.isatty())

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    level = logging.DEBUG if config.debug else getattr(logging, config.log_level.upper())

    proxyfed_logger = logging.getLogger("proxyfed")
    proxyfed_logger.setLevel(level)
    proxyfed_logger.handlers.clear()
    proxyfed_logger.addHandler(handler)
    proxyfed_logger.propagate = False
