"""
Range measurements and weighted least-squares lateration (Newton-Raphson).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from src.dop import build_geometry_matrix, is_numerically_singular
from src.errors import ZeroDistanceLinkError
from src.logging_config import setup_logger
from src.network import NetworkTopology, NodePositions
from src.randgraph import derive_stream

logger = setup_logger(__name__)

DEFAULT_MAX_ITER = 50
DEFAULT_STEP_TOL = 1e-10
# estimates leaving this box are treated as divergence
COORD_LOW, COORD_HIGH = -10.0, 11.0


@dataclass(frozen=True)
class RangeMeasurementSet:
    rho: np.ndarray
    sigma: np.ndarray
    true_distances: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float).ravel()
        sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), rho.shape).astype(float)
        if np.any(sigma <= 0):
            raise ValueError("range noise sigma must be positive")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "sigma", sigma)
        if self.true_distances is not None:
            object.__setattr__(self, "true_distances", np.asarray(self.true_distances, dtype=float).ravel())

    @property
    def errors(self) -> Optional[np.ndarray]:
        if self.true_distances is None:
            return None
        return self.rho - self.true_distances

    def __len__(self) -> int:
        return int(self.rho.size)


@dataclass(frozen=True)
class SolverResult:
    estimate: np.ndarray  # (N_S, d)
    iterations: int
    converged: bool
    residual_norm: float
    step_norms: List[float] = field(default_factory=list)
    singular: bool = False
    diverged: bool = False
    reason: str = ""

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "reason": self.reason,
            "singular": self.singular,
            "diverged": self.diverged,
            "residual_norm": self.residual_norm,
            "step_norms": [float(s) for s in self.step_norms],
            "positions": self.estimate.tolist(),
        }


def synthesize_measurements(
    topology: NetworkTopology,
    positions: NodePositions,
    sigma: float,
    rng: np.random.Generator,
) -> RangeMeasurementSet:
    """rho_k = r_k + eps_k, eps_k i.i.d. N(0, sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = positions.link_distances(topology)
    eps = rng.normal(0.0, sigma, size=r.size)
    return RangeMeasurementSet(rho=r + eps, sigma=np.full(r.size, float(sigma)), true_distances=r)


def solve_wls(
    topology: NetworkTopology,
    anchor_positions: np.ndarray,
    measurements: RangeMeasurementSet,
    initial_guess: np.ndarray,
    max_iter: int = DEFAULT_MAX_ITER,
    step_tol: float = DEFAULT_STEP_TOL,
) -> SolverResult:
    """Iterate p <- p + (G^T W G)^-1 G^T W (rho - r(p)) with W = Sigma^-1,
    rebuilding G at every estimate. Failures are reported, never raised."""
    guess = np.asarray(initial_guess, dtype=float)
    anchors = np.asarray(anchor_positions, dtype=float)
    dim = guess.shape[1] if guess.ndim == 2 else anchors.shape[-1]
    estimate = guess.reshape(topology.n_sensors, dim).copy()
    anchors = anchors.reshape(topology.n_anchors, dim)
    weights = 1.0 / measurements.sigma ** 2
    diverge_step = 10.0 * math.sqrt(dim)
    steps: List[float] = []

    def _result(converged: bool, reason: str, residual: float, **flags) -> SolverResult:
        return SolverResult(
            estimate=estimate.copy(), iterations=len(steps), converged=converged,
            residual_norm=residual, step_norms=list(steps), reason=reason, **flags,
        )

    residual_norm = math.inf
    for _ in range(max_iter):
        positions = NodePositions(np.vstack([estimate, anchors]))
        try:
            g = build_geometry_matrix(topology, positions).to_dense()
        except ZeroDistanceLinkError as e:
            return _result(False, f"zero-distance: {e}", residual_norm, singular=True)
        residual = measurements.rho - positions.link_distances(topology)
        residual_norm = float(np.linalg.norm(residual))
        gw = g.T * weights
        normal = gw @ g
        if g.shape[0] < g.shape[1] or is_numerically_singular(np.linalg.eigvalsh(normal)):
            return _result(False, "singular", residual_norm, singular=True)
        step = sla.cho_solve(sla.cho_factor(normal, lower=True), gw @ residual)
        step_norm = float(np.linalg.norm(step))
        steps.append(step_norm)
        estimate = estimate + step.reshape(estimate.shape)

        if step_norm > diverge_step or np.any(estimate < COORD_LOW) or np.any(estimate > COORD_HIGH):
            return _result(False, "diverged", residual_norm, diverged=True)
        if step_norm <= step_tol:
            final = measurements.rho - NodePositions(np.vstack([estimate, anchors])).link_distances(topology)
            return _result(True, "converged", float(np.linalg.norm(final)))
    return _result(False, "max-iter", residual_norm)


@dataclass(frozen=True)
class CovarianceEstimate:
    covariance: np.ndarray
    mean_error: np.ndarray
    trials: int
    used: int
    diverged: int
    diverged_trials: Sequence[int] = ()


def empirical_error_covariance(
    topology: NetworkTopology,
    anchor_positions: np.ndarray,
    true_positions: NodePositions,
    sigma: float,
    trials: int,
    seed: int,
    workers: int = 1,
    max_iter: int = DEFAULT_MAX_ITER,
    step_tol: float = DEFAULT_STEP_TOL,
    stream_prefix: Tuple[int, ...] = (),
    domain: int = 0,
) -> CovarianceEstimate:
    """Sample covariance of p_hat - p over `trials` noise draws, each solved from the truth.

    Trial t uses derive_stream(seed, *stream_prefix, t, domain=domain); errors are
    reduced in trial order, so the result does not depend on `workers`.
    """
    n_s = topology.n_sensors
    truth = true_positions.sensors(n_s)
    anchors = np.asarray(anchor_positions, dtype=float)

    def _trial(t: int) -> Optional[np.ndarray]:
        rng = derive_stream(seed, *stream_prefix, t, domain=domain)
        meas = synthesize_measurements(topology, true_positions, sigma, rng)
        res = solve_wls(topology, anchors, meas, truth, max_iter=max_iter, step_tol=step_tol)
        if not res.converged:
            logger.debug(f"trial {t} did not converge: {res.reason}", extra={"trial": t, "seed": seed})
            return None
        return (res.estimate - truth).ravel()

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_trial, range(trials)))
    else:
        outcomes = [_trial(t) for t in range(trials)]

    failed = [t for t, e in enumerate(outcomes) if e is None]
    errors = np.array([e for e in outcomes if e is not None], dtype=float)
    size = n_s * truth.shape[1]
    if errors.shape[0] >= 2:
        cov = np.cov(errors, rowvar=False).reshape(size, size)
        mean = errors.mean(axis=0)
    else:
        cov = np.zeros((size, size))
        mean = errors.mean(axis=0) if errors.size else np.zeros(size)
    if failed:
        logger.warning(f"{len(failed)} of {trials} lateration trials diverged", extra={"seed": seed})
    return CovarianceEstimate(
        covariance=cov, mean_error=mean, trials=trials, used=int(errors.shape[0]),
        diverged=len(failed), diverged_trials=tuple(failed),
    )
