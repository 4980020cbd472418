import math
import re
from typing import Optional

_ANSI_RE = re.compile(r"\x1B\[[0-9;]*[A-Za-z]")

SIG_DIGITS = 9


def strip_ansi(s: str) -> str:
    return _ANSI_RE.sub("", s or "")


def format_sig(value: Optional[float], digits: int = SIG_DIGITS) -> str:
    """Fixed significant-digit rendering for CSV cells; None becomes empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def json_number(value: Optional[float]):
    """JSON-safe number: infinities become the string "infinite"."""
    if value is None:
        return None
    if isinstance(value, float) and math.isinf(value):
        return "infinite"
    return value
