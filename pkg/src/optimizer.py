"""
Minimum-AGDOP geometries for a fixed topology.

Multi-start Nelder-Mead over all node coordinates (anchors included) with the
gauge fixed: node 1 at the origin, node 2 on the positive first axis. In 2-D the
returned geometry is also reflected so the first off-axis node has y >= 0.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from src.dop import agdop_at
from src.errors import AllRestartsSingularError, InfeasibleSpecError
from src.logging_config import setup_logger
from src.network import NetworkTopology, NodePositions
from src.randgraph import derive_stream

logger = setup_logger(__name__)

DEFAULT_RESTARTS = 64
DEFAULT_MAX_EVALS = 20000
DEFAULT_TOL = 1e-9


def reference_case(case: int) -> NetworkTopology:
    """Topologies of the four multi-sensor reference cases (1-based link lists)."""
    cases = {
        # N_S=2, delta_S=1, delta_A=2
        1: (2, 4, [(1, 2), (1, 3), (1, 4), (2, 5), (2, 6)]),
        # N_S=2, delta_S=1, delta_A=3
        2: (2, 6, [(1, 2), (1, 3), (1, 4), (1, 5), (2, 6), (2, 7), (2, 8)]),
        # N_S=3, delta_S=2, delta_A=1
        3: (3, 3, [(1, 2), (2, 3), (1, 3), (1, 4), (2, 5), (3, 6)]),
        # N_S=3, delta_S=2, delta_A=2
        4: (3, 6, [(1, 2), (2, 3), (1, 3), (1, 4), (1, 5), (2, 6), (2, 7), (3, 8), (3, 9)]),
    }
    if case not in cases:
        raise InfeasibleSpecError(f"unknown case {case}; expected 1-4")
    n_s, n_a, links = cases[case]
    return NetworkTopology.from_one_based(n_s, n_a, links)


def single_sensor_star(n_anchors: int) -> NetworkTopology:
    """One sensor linked to each of n_anchors anchors."""
    if n_anchors < 1:
        raise InfeasibleSpecError("star needs at least one anchor")
    return NetworkTopology(1, n_anchors, tuple((0, 1 + a) for a in range(n_anchors)))


def optimal_single_sensor_angles(n_anchors: int) -> np.ndarray:
    """Uniform angular placement 2*pi*i/N_A, i = 1..N_A (GDOP 4/N_A when N_A >= 3)."""
    if n_anchors < 2:
        raise InfeasibleSpecError("need at least two anchors")
    return 2.0 * np.pi * np.arange(1, n_anchors + 1) / n_anchors


@dataclass(frozen=True)
class OptimizationProblem:
    topology: NetworkTopology
    dim: int = 2

    def __post_init__(self) -> None:
        if self.topology.n_nodes < 2:
            raise InfeasibleSpecError("geometry optimization needs at least two nodes")
        if self.topology.n_links < self.dim * self.topology.n_sensors:
            raise InfeasibleSpecError(
                f"K={self.topology.n_links} < d*N_S={self.dim * self.topology.n_sensors}: never localizable"
            )

    @property
    def n_free(self) -> int:
        return 1 + (self.topology.n_nodes - 2) * self.dim

    def unpack(self, x: np.ndarray) -> np.ndarray:
        coords = np.zeros((self.topology.n_nodes, self.dim))
        coords[1, 0] = abs(x[0])
        coords[2:] = np.asarray(x[1:]).reshape(-1, self.dim)
        return coords

    def pack(self, coords: np.ndarray) -> np.ndarray:
        """Move arbitrary coordinates into the gauge and return the free vector."""
        c = np.asarray(coords, dtype=float)
        c = c - c[0]
        p1 = c[1]
        norm = float(np.linalg.norm(p1))
        if norm > 0:
            e1 = np.zeros(self.dim)
            e1[0] = norm
            u = p1 - e1
            uu = float(u @ u)
            if uu > 1e-30:
                # Householder reflection taking p1 onto the first axis
                c = c - 2.0 * np.outer(c @ u, u) / uu
        return np.concatenate([[c[1, 0]], c[2:].ravel()])

    def objective(self, x: np.ndarray) -> float:
        return agdop_at(self.topology, self.unpack(x))


def canonicalize(coords: np.ndarray) -> np.ndarray:
    """2-D reflection canonical form: first node off the x-axis gets y >= 0."""
    c = np.array(coords, dtype=float, copy=True)
    if c.shape[1] != 2:
        return c
    for row in c[2:]:
        if abs(row[1]) > 1e-12:
            if row[1] < 0:
                c[:, 1] = -c[:, 1]
            break
    return c


@dataclass(frozen=True)
class RestartOutcome:
    index: int
    value: float
    x: np.ndarray
    evaluations: int


@dataclass(frozen=True)
class OptimizationResult:
    best_agdop: float
    best_positions: NodePositions
    best_restart: int
    restart_values: Tuple[float, ...]
    evaluations: int

    @property
    def singular_restarts(self) -> int:
        return sum(1 for v in self.restart_values if not math.isfinite(v))


def _run_restart(problem: OptimizationProblem, index: int, seed: int, tol: float, max_evals: int) -> RestartOutcome:
    rng = derive_stream(seed, index)
    x = problem.pack(rng.random((problem.topology.n_nodes, problem.dim)))
    best = problem.objective(x)
    evals = 1
    if not math.isfinite(best):
        # a uniform random start is singular only for structurally singular topologies
        logger.debug(f"restart {index} starts singular", extra={"restart": index, "seed": seed})
        return RestartOutcome(index=index, value=best, x=x, evaluations=evals)
    # re-seed the simplex at the incumbent until it stops improving
    while evals < max_evals:
        res = minimize(
            problem.objective, x, method="Nelder-Mead",
            options={"maxfev": max_evals - evals, "xatol": tol, "fatol": tol, "adaptive": True},
        )
        evals += int(res.nfev)
        if math.isfinite(res.fun) and res.fun < best - tol:
            best, x = float(res.fun), np.asarray(res.x, dtype=float)
            continue
        if res.fun < best:
            best, x = float(res.fun), np.asarray(res.x, dtype=float)
        break
    return RestartOutcome(index=index, value=best, x=x, evaluations=evals)


def minimize_agdop(
    problem: OptimizationProblem,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_evals: int = DEFAULT_MAX_EVALS,
    workers: int = 1,
) -> OptimizationResult:
    """Best AGDOP over `restarts` independent local searches (ties go to the lower restart)."""
    if restarts < 1:
        raise InfeasibleSpecError("need at least one restart")

    def _one(index: int) -> RestartOutcome:
        return _run_restart(problem, index, seed, tol, max_evals)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            outcomes: List[RestartOutcome] = list(ex.map(_one, range(restarts)))
    else:
        outcomes = [_one(i) for i in range(restarts)]

    winner: Optional[RestartOutcome] = None
    for out in outcomes:
        if math.isfinite(out.value) and (winner is None or out.value < winner.value):
            winner = out
    if winner is None:
        raise AllRestartsSingularError(restarts)

    coords = canonicalize(problem.unpack(winner.x))
    logger.info(
        f"min AGDOP {winner.value:.6f} at restart {winner.index} of {restarts}",
        extra={"seed": seed, "restart": winner.index},
    )
    return OptimizationResult(
        best_agdop=winner.value,
        best_positions=NodePositions(coords),
        best_restart=winner.index,
        restart_values=tuple(o.value for o in outcomes),
        evaluations=sum(o.evaluations for o in outcomes),
    )
