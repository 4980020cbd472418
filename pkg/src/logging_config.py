import logging
from logging import Logger
from logging.handlers import RotatingFileHandler
import os
import json
import sys
from typing import Optional

LOG_FILE = os.getenv("LOG_FILE", "coloc.log")

# Run-context attributes copied into JSON lines when a call passes them via `extra=`
CONTEXT_FIELDS = ("command", "seed", "point", "trial", "restart")


def _is_true(value: Optional[str]) -> bool:
    """Return True for common truthy strings (1, true, yes, on)."""
    if value is None:
        return False
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


class JsonFormatter(logging.Formatter):
    """JSON line formatter.

    Keys: time, level, name, message, plus any of CONTEXT_FIELDS set on the record.
    """

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "time": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "name": record.name,
            "message": record.getMessage(),
        }
        for key in CONTEXT_FIELDS:
            value = getattr(record, key, None)
            if value is not None:
                payload[key] = value
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False)


def _make_formatter() -> logging.Formatter:
    if _is_true(os.getenv("LOG_JSON")):
        return JsonFormatter(datefmt="%Y-%m-%d %H:%M:%S")
    return logging.Formatter(
        '%(asctime)s | %(levelname)s | %(name)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
    )


def setup_logger(name: str, log_file: str = LOG_FILE, level: str = "INFO") -> Logger:
    """
    Set up a logger with a rotating file handler. LOG_LEVEL in the environment wins over `level`.

    LOG_JSON switches the file format to JSON lines; LOG_STDERR adds a stderr handler
    with the same format. Handlers are attached once per logger name; the level is
    (re)applied on each call.
    """
    logger = logging.getLogger(name)

    log_level_str = os.getenv("LOG_LEVEL", level).upper()
    log_level = getattr(logging, log_level_str, logging.INFO)

    if not logger.handlers:
        formatter = _make_formatter()
        handler = RotatingFileHandler(
            log_file,
            maxBytes=2 * 1024 * 1024,
            backupCount=2,
            encoding="utf-8",
            delay=True,
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        if _is_true(os.getenv("LOG_STDERR")):
            console = logging.StreamHandler(sys.stderr)
            console.setFormatter(formatter)
            logger.addHandler(console)
        # the CLI prints its own results; keep records out of the root logger
        logger.propagate = False

    logger.setLevel(log_level)
    return logger
