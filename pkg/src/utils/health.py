from __future__ import annotations
import os
from pathlib import Path
import importlib
from typing import Tuple, List


essential_imports = [
    ("numpy", "numpy import failed"),
    ("scipy.linalg", "scipy import failed"),
    ("scipy.optimize", "scipy.optimize import failed"),
    ("networkx", "networkx import failed"),
    ("pydantic", "pydantic import failed"),
]


def _check_imports(messages: List[str]) -> bool:
    ok = True
    for modname, errprefix in essential_imports:
        try:
            importlib.import_module(modname)
            messages.append(f"{modname} import ok")
        except Exception as e:
            messages.append(f"{errprefix}: {e.__class__.__name__}: {e}")
            ok = False
    return ok


def _check_logfile(messages: List[str]) -> bool:
    log_file = os.getenv("LOG_FILE", "coloc.log")
    path = Path(log_file)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a"):
            pass
        messages.append(f"log file writable: {path}")
        return True
    except Exception as e:
        messages.append(f"log file not writable: {path} -> {e}")
        return False


def _check_linalg(messages: List[str]) -> bool:
    try:
        from src.dop import lb_e_agdop, lb_via_direct_inverse

        closed = lb_e_agdop(2, 1, 2).lb_e_agdop
        direct = lb_via_direct_inverse(2, 1, 2)
    except Exception as e:
        messages.append(f"bound self-test failed: {e.__class__.__name__}: {e}")
        return False
    if abs(closed - 1.5) > 1e-12 or abs(direct - 1.5) > 1e-9:
        messages.append(f"bound self-test mismatch: closed={closed!r} direct={direct!r}")
        return False
    messages.append("bound self-test ok")
    return True


def healthcheck_env() -> Tuple[bool, List[str]]:
    """
    Run basic environment health checks.
    - Verifies the numerical dependencies import
    - Verifies log file path is writable (LOG_FILE or coloc.log)
    - Evaluates one known bound both in closed form and by dense inversion

    Returns: (ok, messages)
    """
    messages: List[str] = []
    results = [
        _check_imports(messages),
        _check_logfile(messages),
        _check_linalg(messages),
    ]
    ok = all(results)
    return ok, messages
