"""
Random network instances: ERG / RGG / RPG graph models and exact degree targets.

Sensor positions are i.i.d. uniform in [0, 1]^d; anchors follow the requested
placement. Every generator is a pure function of (spec, rng), so per-trial
streams from derive_stream make runs reproducible in any execution order.
"""
from __future__ import annotations

import itertools
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from src.errors import InfeasibleSpecError
from src.logging_config import setup_logger
from src.network import NetworkTopology, NodePositions

logger = setup_logger(__name__)

ModelName = Literal["erg", "rgg", "rpg", "degree"]
AnchorPlacement = Literal["corners", "uniform", "directions", "explicit"]

# corners of the unit square in the order used by the reference simulations
SQUARE_CORNERS = ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0))

_MAX_RESAMPLE = 100
_INT_TOL = 1e-9


def derive_stream(master_seed: int, *keys: int, domain: int = 0) -> np.random.Generator:
    """Counter-based stream for (master_seed, *keys), e.g. (seed, point, trial).

    A non-zero domain separates streams that share the same keys.
    """
    entropy = [int(master_seed)] + [int(k) for k in keys]
    spawn_key = (int(domain),) if domain else ()
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy, spawn_key=spawn_key)))


def _as_count(value: float, what: str) -> int:
    rounded = round(value)
    if abs(value - rounded) > _INT_TOL:
        raise InfeasibleSpecError(f"{what} = {value:g} is not an integer")
    return int(rounded)


def degree_target_counts(n_sensors: int, n_anchors: int, delta_s: float, delta_a: float) -> Tuple[int, int]:
    """(K_S, K_A) for a degree target; raises InfeasibleSpecError when not realizable."""
    if n_sensors < 1:
        raise InfeasibleSpecError("degree target needs at least one sensor")
    if delta_s < 0 or delta_a < 0:
        raise InfeasibleSpecError("average degrees must be non-negative")
    k_s = _as_count(n_sensors * delta_s / 2.0, "K_S = N_S*delta_S/2")
    k_a = _as_count(n_sensors * delta_a, "K_A = N_S*delta_A")
    max_s = n_sensors * (n_sensors - 1) // 2
    max_a = n_sensors * n_anchors
    if k_s > max_s:
        raise InfeasibleSpecError(f"K_S = {k_s} exceeds the {max_s} sensor pairs")
    if k_a > max_a:
        raise InfeasibleSpecError(f"K_A = {k_a} exceeds the {max_a} anchor-sensor pairs")
    return k_s, k_a


class GraphModelSpec(BaseModel):
    """One random-network configuration.

    model selects which parameter is used: p (erg), r (rgg), k (rpg) or
    delta_s/delta_a (degree).
    """

    model_config = ConfigDict(frozen=True)

    model: ModelName
    n_sensors: int = Field(ge=1)
    n_anchors: int = Field(default=4, ge=0)
    dim: int = Field(default=2, ge=1)
    p: Optional[float] = None
    r: Optional[float] = None
    k: Optional[int] = None
    delta_s: Optional[float] = None
    delta_a: Optional[float] = None
    anchor_placement: AnchorPlacement = "corners"
    anchor_coords: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _check(self) -> "GraphModelSpec":
        n = self.n_sensors + self.n_anchors
        if self.model == "erg":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError("erg needs 0 <= p <= 1")
        elif self.model == "rgg":
            if self.r is None or self.r <= 0:
                raise ValueError("rgg needs r > 0")
        elif self.model == "rpg":
            if self.k is None or self.k < 1:
                raise ValueError("rpg needs k >= 1")
            if self.k >= n:
                raise ValueError(f"rpg needs k < N (k={self.k}, N={n})")
        elif self.model == "degree":
            if self.delta_s is None or self.delta_a is None:
                raise ValueError("degree target needs delta_s and delta_a")
            try:
                degree_target_counts(self.n_sensors, self.n_anchors, self.delta_s, self.delta_a)
            except InfeasibleSpecError as e:
                raise ValueError(str(e)) from e

        if self.anchor_placement == "corners":
            if self.dim == 2:
                if self.n_anchors > 4:
                    raise ValueError("corner placement in 2-D holds at most 4 anchors")
            elif self.n_anchors != 2 ** self.dim:
                raise ValueError(f"corner placement in {self.dim}-D needs exactly {2 ** self.dim} anchors")
        elif self.anchor_placement == "explicit":
            coords = self.anchor_coords or []
            if len(coords) != self.n_anchors or any(len(c) != self.dim for c in coords):
                raise ValueError(f"explicit placement needs {self.n_anchors} anchors of dimension {self.dim}")
        return self

    def param_label(self) -> str:
        if self.model == "erg":
            return f"p={self.p:g}"
        if self.model == "rgg":
            return f"r={self.r:g}"
        if self.model == "rpg":
            return f"k={self.k}"
        return f"delta_s={self.delta_s:g};delta_a={self.delta_a:g}"


def _corner_anchors(n_anchors: int, dim: int) -> np.ndarray:
    if dim == 2:
        if n_anchors > len(SQUARE_CORNERS):
            raise InfeasibleSpecError("corner placement in 2-D holds at most 4 anchors")
        return np.array(SQUARE_CORNERS[:n_anchors], dtype=float).reshape(n_anchors, 2)
    if n_anchors != 2 ** dim:
        raise InfeasibleSpecError(f"corner placement in {dim}-D needs exactly {2 ** dim} anchors")
    return np.array(list(itertools.product((0.0, 1.0), repeat=dim)), dtype=float)


def place_anchors(spec: GraphModelSpec, sensors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n_a, dim = spec.n_anchors, spec.dim
    if spec.anchor_placement == "corners":
        return _corner_anchors(n_a, dim)
    if spec.anchor_placement == "uniform":
        return rng.random((n_a, dim))
    if spec.anchor_placement == "directions":
        # unit sphere around the sensor centroid, isotropic directions
        g = rng.standard_normal((n_a, dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return sensors.mean(axis=0) + g / norms
    return np.asarray(spec.anchor_coords, dtype=float).reshape(n_a, dim)


def draw_positions(spec: GraphModelSpec, rng: np.random.Generator) -> NodePositions:
    """Uniform sensors, placed anchors; a sensor landing on another node is redrawn."""
    n_s, dim = spec.n_sensors, spec.dim
    sensors = rng.random((n_s, dim))
    anchors = place_anchors(spec, sensors, rng)
    for _ in range(_MAX_RESAMPLE):
        coords = np.vstack([sensors, anchors])
        d = cdist(sensors, coords)
        d[np.arange(n_s), np.arange(n_s)] = np.inf
        clash = np.flatnonzero((d <= 0.0).any(axis=1))
        if clash.size == 0:
            return NodePositions(coords)
        logger.debug(f"redrawing {clash.size} coincident sensors")
        sensors[clash] = rng.random((clash.size, dim))
    raise InfeasibleSpecError("could not draw distinct sensor positions")


def admissible_pairs(n_sensors: int, n_anchors: int) -> Tuple[np.ndarray, np.ndarray]:
    """All pairs except anchor-anchor: sensor pairs (lexicographic), then sensor-anchor."""
    ss_i, ss_j = np.triu_indices(n_sensors, k=1)
    sa_i = np.repeat(np.arange(n_sensors), n_anchors)
    sa_j = np.tile(np.arange(n_sensors, n_sensors + n_anchors), n_sensors)
    return (
        np.concatenate([ss_i, sa_i]).astype(np.intp),
        np.concatenate([ss_j, sa_j]).astype(np.intp),
    )


def _topology_from_mask(n_s: int, n_a: int, i: np.ndarray, j: np.ndarray, mask: np.ndarray) -> NetworkTopology:
    links = tuple(zip(i[mask].tolist(), j[mask].tolist()))
    return NetworkTopology(n_s, n_a, links)


def _knn_mask(coords: np.ndarray, k: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    n = coords.shape[0]
    if k >= n:
        raise InfeasibleSpecError(f"rpg needs k < N (k={k}, N={n})")
    _, nbrs = cKDTree(coords).query(coords, k=k + 1)
    adj = np.zeros((n, n), dtype=bool)
    for node in range(n):
        chosen = [m for m in np.atleast_1d(nbrs[node]).tolist() if m != node][:k]
        adj[node, chosen] = True
    # union of directed choices; anchor-anchor pairs never appear in (i, j)
    adj |= adj.T
    return adj[i, j]


def generate(spec: GraphModelSpec, rng: np.random.Generator) -> Tuple[NetworkTopology, NodePositions]:
    """Draw one (topology, positions) instance for the spec's graph model."""
    if spec.model == "degree":
        return generate_degree_target(
            spec.n_sensors, spec.n_anchors, spec.delta_s, spec.delta_a,
            dim=spec.dim, anchor_placement=spec.anchor_placement, rng=rng,
            anchor_coords=spec.anchor_coords,
        )
    positions = draw_positions(spec, rng)
    n_s, n_a = spec.n_sensors, spec.n_anchors
    i, j = admissible_pairs(n_s, n_a)
    coords = positions.coords
    if spec.model == "erg":
        mask = rng.random(i.size) < spec.p
    elif spec.model == "rgg":
        mask = np.linalg.norm(coords[i] - coords[j], axis=1) <= spec.r
    else:
        mask = _knn_mask(coords, int(spec.k), i, j)
    return _topology_from_mask(n_s, n_a, i, j, mask), positions


def generate_degree_target(
    n_sensors: int,
    n_anchors: int,
    delta_s: float,
    delta_a: float,
    dim: int = 2,
    anchor_placement: AnchorPlacement = "corners",
    rng: Optional[np.random.Generator] = None,
    anchor_coords: Optional[List[List[float]]] = None,
) -> Tuple[NetworkTopology, NodePositions]:
    """Exactly K_S sensor pairs and K_A anchor-sensor pairs, each set sampled
    uniformly without replacement; realized average degrees equal the targets."""
    k_s, k_a = degree_target_counts(n_sensors, n_anchors, delta_s, delta_a)
    rng = rng if rng is not None else derive_stream(0)
    spec = GraphModelSpec(
        model="degree", n_sensors=n_sensors, n_anchors=n_anchors, dim=dim,
        delta_s=delta_s, delta_a=delta_a, anchor_placement=anchor_placement,
        anchor_coords=anchor_coords,
    )
    positions = draw_positions(spec, rng)

    i, j = admissible_pairs(n_sensors, n_anchors)
    n_pairs_s = math.comb(n_sensors, 2)
    pick_s = np.sort(rng.choice(n_pairs_s, size=k_s, replace=False)) if k_s else np.zeros(0, dtype=np.intp)
    pick_a = np.sort(rng.choice(n_sensors * n_anchors, size=k_a, replace=False)) if k_a else np.zeros(0, dtype=np.intp)
    mask = np.zeros(i.size, dtype=bool)
    mask[pick_s] = True
    mask[n_pairs_s + pick_a] = True
    return _topology_from_mask(n_sensors, n_anchors, i, j, mask), positions
