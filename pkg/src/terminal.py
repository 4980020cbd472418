"""
Colored status lines on stderr for long-running commands (stdout stays machine readable).
"""
import os
import sys
from dataclasses import dataclass
from typing import Optional, TextIO

import colorama

from src.logging_config import setup_logger


@dataclass
class ThemeConfig:
    """Color scheme configuration"""
    primary: str = colorama.Fore.LIGHTMAGENTA_EX + colorama.Style.BRIGHT
    success: str = colorama.Fore.LIGHTGREEN_EX
    error: str = colorama.Fore.LIGHTRED_EX + colorama.Style.BRIGHT
    warning: str = colorama.Fore.LIGHTYELLOW_EX + colorama.Style.BRIGHT
    dim: str = colorama.Style.DIM
    reset: str = colorama.Style.RESET_ALL


class StatusReporter:
    """Progress and summary lines for sweeps and optimizations."""

    def __init__(self, stream: Optional[TextIO] = None, color: Optional[bool] = None) -> None:
        self.stream = stream if stream is not None else sys.stderr
        if color is None:
            color = bool(getattr(self.stream, "isatty", lambda: False)()) and not os.getenv("NO_COLOR")
        self.color = color
        self.theme = ThemeConfig()
        self.logger = setup_logger(__name__)

    def _paint(self, style: str, text: str) -> str:
        return f"{style}{text}{self.theme.reset}" if self.color else text

    def _emit(self, text: str) -> None:
        print(text, file=self.stream, flush=True)

    def info(self, text: str) -> None:
        self._emit(self._paint(self.theme.primary, text))

    def success(self, text: str) -> None:
        self._emit(self._paint(self.theme.success, text))

    def warning(self, text: str) -> None:
        self.logger.warning(text)
        self._emit(self._paint(self.theme.warning, text))

    def error(self, text: str, extra: Optional[dict] = None) -> None:
        self.logger.error(text, extra=extra)
        self._emit(self._paint(self.theme.error, f"error: {text}"))

    def point(self, index: int, total: int, row) -> None:
        """One line per finished sweep point."""
        head = self._paint(self.theme.dim, f"[{index + 1}/{total}]")
        label = f"{row.model} {row.params} N_S={row.n_sensors} N_A={row.n_anchors}"
        if not row.ok:
            self._emit(f"{head} {label} {self._paint(self.theme.error, row.status)}")
            return
        flag = self._paint(self.theme.warning, " likely-infinite") if row.likely_infinite else ""
        self._emit(
            f"{head} {label} lb={row.lb:.4g} mean={row.agdop_mean:.4g} "
            f"min={row.agdop_min:.4g} singular={row.singular_fraction:.1%}{flag}"
        )
