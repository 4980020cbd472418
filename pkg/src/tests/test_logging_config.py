import json
import logging
import sys

from src.logging_config import JsonFormatter, setup_logger


def _flush(logger):
    for h in logger.handlers:
        h.flush()


def test_plain_lines_go_to_the_log_file(tmp_path, monkeypatch):
    monkeypatch.delenv("LOG_JSON", raising=False)
    monkeypatch.delenv("LOG_LEVEL", raising=False)
    path = tmp_path / "run.log"
    logger = setup_logger("coloc.test.plain", log_file=str(path))
    logger.info("sweep started")
    logger.debug("hidden at INFO")
    _flush(logger)
    text = path.read_text(encoding="utf-8")
    assert "| INFO | coloc.test.plain | sweep started" in text
    assert "hidden" not in text
    assert logger.propagate is False


def test_json_lines_carry_run_context(tmp_path, monkeypatch):
    monkeypatch.setenv("LOG_JSON", "yes")
    path = tmp_path / "run.jsonl"
    logger = setup_logger("coloc.test.json", log_file=str(path))
    logger.warning("point done", extra={"seed": 7, "point": 3})
    _flush(logger)
    record = json.loads(path.read_text(encoding="utf-8").splitlines()[-1])
    assert record["level"] == "WARNING"
    assert record["message"] == "point done"
    assert (record["seed"], record["point"]) == (7, 3)
    assert "restart" not in record


def test_log_level_env_wins(tmp_path, monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "debug")
    logger = setup_logger("coloc.test.level", log_file=str(tmp_path / "x.log"), level="WARNING")
    assert logger.level == logging.DEBUG
    monkeypatch.setenv("LOG_LEVEL", "ERROR")
    again = setup_logger("coloc.test.level", log_file=str(tmp_path / "x.log"))
    assert again is logger
    assert len(again.handlers) == 1
    assert again.level == logging.ERROR


def test_json_formatter_includes_exceptions():
    try:
        raise ValueError("boom")
    except ValueError:
        record = logging.LogRecord("n", logging.ERROR, __file__, 1, "failed", None, sys.exc_info())
    payload = json.loads(JsonFormatter().format(record))
    assert "ValueError: boom" in payload["exc_info"]
