"""
Text formats: network instance files and flat key=value experiment configs.

Instance file (line oriented, `#` starts a comment):

    dim N_S N_A
    x y [z ...]          N coordinate lines, sensors first
    i j [rho] [sigma]    one line per link, 1-based node indices

Experiment config (read with python-dotenv):

    trials = 2000
    seed = 7
    sweep.1.model = erg
    sweep.1.n_sensors = 8,16
    sweep.1.p = 0.3,0.5,0.7
    sweep.2.model = degree
    sweep.2.n_anchors = 3..9

Comma lists expand to a cartesian grid inside a block; `a..b` is an inclusive
integer range.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from src.errors import ConfigError, InstanceParseError
from src.experiment import ExperimentConfig, PointValue
from src.logging_config import setup_logger
from src.network import NetworkTopology, NodePositions

logger = setup_logger(__name__)

TOP_LEVEL_KEYS = ("trials", "seed", "dim", "policy", "sigma", "label")
# grid expansion order: the last field varies fastest
POINT_FIELDS = ("model", "n_sensors", "n_anchors", "anchors", "p", "r", "k", "delta_s", "delta_a")
_SWEEP_KEY = re.compile(r"^sweep\.(\d+)\.([a-z_]+)$")
_RANGE = re.compile(r"^(-?\d+)\.\.(-?\d+)$")


@dataclass(frozen=True)
class Instance:
    topology: NetworkTopology
    positions: NodePositions
    rho: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.positions.dim

    @property
    def has_ranges(self) -> bool:
        return self.rho is not None


def _tokens(raw: str) -> List[Tuple[str, int]]:
    """(token, 1-based column) pairs of a line with its comment removed."""
    body = raw.split("#", 1)[0]
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", body)]


def _number(tok: Tuple[str, int], line: int, kind=float):
    text, col = tok
    try:
        return kind(text)
    except ValueError:
        what = "an integer" if kind is int else "a number"
        raise InstanceParseError(f"expected {what}, got {text!r}", line, col) from None


def parse_instance_text(text: str) -> Instance:
    lines = [(n, _tokens(raw)) for n, raw in enumerate(text.splitlines(), start=1)]
    lines = [(n, toks) for n, toks in lines if toks]
    if not lines:
        raise InstanceParseError("empty instance: missing 'dim N_S N_A' header", 1)

    line_no, header = lines[0]
    if len(header) != 3:
        col = header[3][1] if len(header) > 3 else 1
        raise InstanceParseError("header must be 'dim N_S N_A'", line_no, col)
    dim, n_s, n_a = (_number(t, line_no, int) for t in header)
    if dim < 1:
        raise InstanceParseError("dim must be >= 1", line_no, header[0][1])
    if n_s < 0 or n_a < 0:
        raise InstanceParseError("node counts must be non-negative", line_no, header[1][1])
    n = n_s + n_a

    body = lines[1:]
    if len(body) < n:
        last = body[-1][0] if body else line_no
        raise InstanceParseError(f"expected {n} coordinate lines, found {len(body)}", last + 1)
    coords = np.zeros((n, dim))
    for row, (ln, toks) in enumerate(body[:n]):
        if len(toks) != dim:
            col = toks[dim][1] if len(toks) > dim else toks[-1][1]
            raise InstanceParseError(f"coordinate line needs {dim} values, got {len(toks)}", ln, col)
        coords[row] = [_number(t, ln) for t in toks]

    links: List[Tuple[int, int]] = []
    rho: List[float] = []
    sigma: List[float] = []
    width = None
    for ln, toks in body[n:]:
        if not 2 <= len(toks) <= 4:
            col = toks[4][1] if len(toks) > 4 else toks[-1][1]
            raise InstanceParseError("link line must be 'i j [rho] [sigma]'", ln, col)
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise InstanceParseError("every link line must carry the same columns", ln, toks[-1][1])
        i, j = (_number(t, ln, int) for t in toks[:2])
        for value, tok in ((i, toks[0]), (j, toks[1])):
            if not 1 <= value <= n:
                raise InstanceParseError(f"node {value} outside 1..{n}", ln, tok[1])
        links.append((i - 1, j - 1))
        if len(toks) >= 3:
            rho.append(_number(toks[2], ln))
        if len(toks) == 4:
            s = _number(toks[3], ln)
            if s <= 0:
                raise InstanceParseError("sigma must be positive", ln, toks[3][1])
            sigma.append(s)

    topology = NetworkTopology(n_s, n_a, tuple(links))
    rho_arr = np.array(rho, dtype=float) if rho else None
    sigma_arr = np.array(sigma, dtype=float) if sigma else None
    return Instance(topology=topology, positions=NodePositions(coords), rho=rho_arr, sigma=sigma_arr)


def read_instance(path: Union[str, Path]) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    instance = parse_instance_text(text)
    logger.debug(f"read instance {path}: N_S={instance.topology.n_sensors}, K={instance.topology.n_links}")
    return instance


def format_instance(
    topology: NetworkTopology,
    positions: NodePositions,
    rho: Optional[Sequence[float]] = None,
    sigma: Optional[Sequence[float]] = None,
) -> str:
    out = [f"{positions.dim} {topology.n_sensors} {topology.n_anchors}"]
    out += [" ".join(f"{c:.17g}" for c in row) for row in positions.coords]
    for k, (i, j) in enumerate(topology.to_one_based()):
        cols = [str(i), str(j)]
        if rho is not None:
            cols.append(f"{rho[k]:.17g}")
        if sigma is not None:
            cols.append(f"{sigma[k]:.17g}")
        out.append(" ".join(cols))
    return "\n".join(out) + "\n"


def write_instance(path: Union[str, Path], *args, **kwargs) -> Path:
    path = Path(path)
    path.write_text(format_instance(*args, **kwargs), encoding="utf-8")
    return path


def _scalar(text: str) -> PointValue:
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _expand(key: str, value: str) -> List[PointValue]:
    items = [v.strip() for v in value.split(",")]
    if any(not v for v in items):
        raise ConfigError(f"{key}: empty value in list {value!r}")
    out: List[PointValue] = []
    for item in items:
        m = _RANGE.match(item)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError(f"{key}: empty range {item!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(_scalar(item))
    return out


def expand_sweeps(blocks: Dict[int, Dict[str, str]]) -> List[Dict[str, PointValue]]:
    points: List[Dict[str, PointValue]] = []
    for index in sorted(blocks):
        block = blocks[index]
        if "model" not in block:
            raise ConfigError(f"sweep.{index} has no model")
        fields = [f for f in POINT_FIELDS if f in block]
        grids = [_expand(f"sweep.{index}.{f}", block[f]) for f in fields]
        for combo in itertools.product(*grids):
            points.append(dict(zip(fields, combo)))
    return points


def parse_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)

    top: Dict[str, str] = {}
    blocks: Dict[int, Dict[str, str]] = {}
    for key, value in values.items():
        if value is None or not value.strip():
            raise ConfigError(f"{key}: missing value")
        m = _SWEEP_KEY.match(key)
        if m:
            index, field = int(m.group(1)), m.group(2)
            if field not in POINT_FIELDS:
                raise ConfigError(f"{key}: unknown sweep field {field!r}")
            blocks.setdefault(index, {})[field] = value
        elif key in TOP_LEVEL_KEYS:
            top[key] = value.strip()
        else:
            raise ConfigError(f"unknown config key {key!r}")

    points = expand_sweeps(blocks)
    try:
        config = ExperimentConfig(points=points, **top)
    except ValidationError as e:
        detail = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid config {path}: {detail}") from e
    logger.info(f"config {path}: {len(points)} grid points, {config.trials} trials each")
    return config
