"""
Dilution-of-precision mathematics.

Geometry matrix G (K x dN_S), DOP matrix H = (G^T G)^-1, GDOP = tr(H) and
AGDOP = tr(H)/N_S (trace form, no square root), the conditional expectation
Xi of F = G^T G over node positions, its expectation over uniformly sampled
links, and the closed-form lower bound on expected AGDOP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import linalg as sla
from scipy import sparse

from src.errors import (
    InfeasibleSpecError,
    SingularMatrixError,
    SingularSampleError,
    ZeroDistanceLinkError,
)
from src.network import NetworkTopology, NodePositions

# F is singular when lambda_min <= SINGULAR_RTOL * lambda_max
SINGULAR_RTOL = 1e-10
# above this size the diagonal of H is gathered from blocked column solves
DENSE_LIMIT = 512


# ---------------------------------------------------------------------------
# Geometry matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryMatrix:
    """Sparse (CSR) Jacobian of link lengths w.r.t. sensor coordinates."""

    matrix: sparse.csr_matrix
    n_sensors: int
    dim: int

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def cols(self) -> int:
        return int(self.matrix.shape[1])

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def fisher(self) -> np.ndarray:
        """F = G^T G as a dense symmetric array."""
        f = (self.matrix.T @ self.matrix).toarray()
        return 0.5 * (f + f.T)

    def row_block_norms(self) -> np.ndarray:
        """Euclidean norm of every nonzero d-block, row-major."""
        dense = self.to_dense().reshape(self.rows, self.n_sensors, self.dim)
        norms = np.linalg.norm(dense, axis=2)
        return norms[norms > 0]


def geometry_triplets(topology: NetworkTopology, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """COO triplets of G: +v_k at sensor i_k's block, -v_k at j_k's block if j_k is a sensor."""
    coords = np.asarray(coords, dtype=float)
    dim = coords.shape[1]
    i, j = topology.link_arrays()
    diff = coords[i] - coords[j]
    r = np.linalg.norm(diff, axis=1)
    zero = np.flatnonzero(r <= 0.0)
    if zero.size:
        k = int(zero[0])
        raise ZeroDistanceLinkError((int(i[k]), int(j[k])))
    v = diff / r[:, None]

    k_idx = np.arange(i.size)
    offs = np.arange(dim)
    rows = [np.repeat(k_idx, dim)]
    cols = [(i[:, None] * dim + offs).ravel()]
    vals = [v.ravel()]
    sensor_j = j < topology.n_sensors
    if sensor_j.any():
        rows.append(np.repeat(k_idx[sensor_j], dim))
        cols.append((j[sensor_j][:, None] * dim + offs).ravel())
        vals.append(-v[sensor_j].ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def build_geometry_matrix(topology: NetworkTopology, positions: NodePositions) -> GeometryMatrix:
    dim = positions.dim
    rows, cols, vals = geometry_triplets(topology, positions.coords)
    shape = (topology.n_links, dim * topology.n_sensors)
    g = sparse.csr_matrix((vals, (rows, cols)), shape=shape)
    return GeometryMatrix(matrix=g, n_sensors=topology.n_sensors, dim=dim)


# ---------------------------------------------------------------------------
# DOP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DopReport:
    """DOP of one instance. DOP fields are None when F is singular."""

    n_sensors: int
    singular: bool
    condition_estimate: float
    per_coord_dop: Optional[np.ndarray] = field(default=None, repr=False)
    gdop: Optional[float] = None
    agdop: Optional[float] = None

    @property
    def agdop_or_inf(self) -> float:
        return math.inf if self.agdop is None else float(self.agdop)

    def as_dict(self, sqrt: bool = False) -> dict:
        out = {
            "singular": self.singular,
            "n_sensors": self.n_sensors,
            "per_coord_dop": None if self.per_coord_dop is None else [float(x) for x in self.per_coord_dop],
            "gdop": self.gdop,
            "agdop": self.agdop,
            "condition_estimate": self.condition_estimate if math.isfinite(self.condition_estimate) else "infinite",
        }
        if sqrt:
            # display-only comparison with the square-root convention
            out["sqrt_gdop"] = None if self.gdop is None else math.sqrt(self.gdop)
            out["sqrt_agdop"] = None if self.agdop is None else math.sqrt(self.agdop)
        return out


def is_numerically_singular(eigenvalues: np.ndarray) -> bool:
    lam_max = float(np.max(eigenvalues)) if eigenvalues.size else 0.0
    if lam_max <= 0.0:
        return True
    return float(np.min(eigenvalues)) <= SINGULAR_RTOL * lam_max


def _inverse_diagonal(factor: Tuple[np.ndarray, bool], n: int) -> np.ndarray:
    if n <= DENSE_LIMIT:
        return np.diag(sla.cho_solve(factor, np.eye(n))).copy()
    diag = np.empty(n)
    for start in range(0, n, DENSE_LIMIT):
        stop = min(start + DENSE_LIMIT, n)
        rhs = np.zeros((n, stop - start))
        rhs[np.arange(start, stop), np.arange(stop - start)] = 1.0
        sol = sla.cho_solve(factor, rhs)
        diag[start:stop] = sol[np.arange(start, stop), np.arange(stop - start)]
    return diag


def dop_from_fisher(fisher: np.ndarray, n_sensors: int) -> DopReport:
    """DopReport from F = G^T G (symmetric, size dN_S)."""
    f = np.asarray(fisher, dtype=float)
    n = f.shape[0]
    if n == 0:
        return DopReport(n_sensors=n_sensors, singular=True, condition_estimate=math.inf)
    eig = np.linalg.eigvalsh(f)
    if is_numerically_singular(eig):
        return DopReport(n_sensors=n_sensors, singular=True, condition_estimate=math.inf)
    try:
        factor = sla.cho_factor(f, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return DopReport(n_sensors=n_sensors, singular=True, condition_estimate=math.inf)
    diag = _inverse_diagonal(factor, n)
    diag.setflags(write=False)
    gdop = float(diag.sum())
    return DopReport(
        n_sensors=n_sensors,
        singular=False,
        condition_estimate=float(eig[-1] / eig[0]),
        per_coord_dop=diag,
        gdop=gdop,
        agdop=gdop / n_sensors,
    )


def compute_dop(g: GeometryMatrix) -> DopReport:
    return dop_from_fisher(g.fisher(), g.n_sensors)


def agdop_at(topology: NetworkTopology, coords: np.ndarray) -> float:
    """AGDOP of a topology at raw coordinates; inf when singular or a link has zero length.

    Dense fast path for the inner loops of the optimizer and the Monte-Carlo harness.
    """
    coords = np.asarray(coords, dtype=float)
    dim = coords.shape[1]
    try:
        rows, cols, vals = geometry_triplets(topology, coords)
    except ZeroDistanceLinkError:
        return math.inf
    g = np.zeros((topology.n_links, dim * topology.n_sensors))
    g[rows, cols] = vals
    if g.shape[1] == 0:
        return math.inf
    eig = np.linalg.eigvalsh(g.T @ g)
    if is_numerically_singular(eig):
        return math.inf
    # tr(F^-1) is the sum of reciprocal eigenvalues
    return float(np.sum(1.0 / eig)) / topology.n_sensors


def single_sensor_gdop(angles: Sequence[float]) -> float:
    """GDOP of one sensor seen from anchors at polar angles theta_i (2-D):
    N_A / sum_{i<j} sin^2(theta_j - theta_i); infinite for collinear anchors."""
    theta = np.asarray(angles, dtype=float).ravel()
    if theta.size < 2:
        raise InfeasibleSpecError("single-sensor GDOP needs at least two anchors")
    diffs = np.subtract.outer(theta, theta)[np.triu_indices(theta.size, k=1)]
    denom = float(np.sum(np.sin(diffs) ** 2))
    if denom <= 1e-12:
        return math.inf
    return theta.size / denom


# ---------------------------------------------------------------------------
# Expectation structure and the connectivity bound
# ---------------------------------------------------------------------------

def laplacian_submatrix(topology: NetworkTopology) -> np.ndarray:
    """Graph Laplacian with the anchor rows and columns deleted (N_S x N_S)."""
    lap = nx.laplacian_matrix(topology.to_graph(), nodelist=list(range(topology.n_nodes)))
    n_s = topology.n_sensors
    return np.asarray(lap.toarray(), dtype=float)[:n_s, :n_s]


def conditional_expectation_xi(topology: NetworkTopology, dim: int) -> np.ndarray:
    """Per-coordinate factor of E[F | links]: deg(i)/d on the diagonal, -1/d per sensor link."""
    return laplacian_submatrix(topology) / float(dim)


def xi_full(topology: NetworkTopology, dim: int) -> np.ndarray:
    """Kronecker expansion Xi = Xi_check (x) I_d, size dN_S."""
    return np.kron(conditional_expectation_xi(topology, dim), np.eye(dim))


def expected_fcheck(n_sensors: int, delta: float, delta_s: float, dim: int) -> np.ndarray:
    """E[F_check] over uniformly chosen sensor links: delta/d on the diagonal,
    -delta_s/(d(N_S-1)) elsewhere."""
    if n_sensors < 1:
        raise InfeasibleSpecError("need at least one sensor")
    if n_sensors < 2:
        if delta_s > 0:
            raise InfeasibleSpecError("a single sensor cannot have sensor links")
        return np.array([[delta / dim]], dtype=float)
    off = -delta_s / (dim * (n_sensors - 1))
    m = np.full((n_sensors, n_sensors), off, dtype=float)
    np.fill_diagonal(m, delta / dim)
    return m


def sherman_morrison_inverse(a_inv: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(A + u v^T)^-1 from A^-1."""
    a_inv = np.asarray(a_inv, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    au = a_inv @ u
    va = v @ a_inv
    denom = 1.0 + float(v @ au)
    if abs(denom) <= 1e-300:
        raise SingularMatrixError("rank-one update makes the matrix singular")
    return a_inv - np.outer(au, va) / denom


@dataclass(frozen=True)
class ConnectivityBound:
    lb_e_agdop: float
    eta: float
    zeta: float
    dim: int
    n_sensors: int
    delta_s: float
    delta_a: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lb_e_agdop)

    @property
    def delta(self) -> float:
        return self.delta_s + self.delta_a

    def as_dict(self) -> dict:
        return {
            "lb_e_agdop": self.lb_e_agdop if self.finite else "infinite",
            "eta": self.eta,
            "zeta": self.zeta,
            "inputs": {
                "dim": self.dim,
                "n_sensors": self.n_sensors,
                "delta_s": self.delta_s,
                "delta_a": self.delta_a,
            },
        }


def _eta_zeta(n_sensors: int, delta_s: float, delta: float, dim: int) -> Tuple[float, float]:
    if n_sensors == 1:
        return delta / dim, 0.0
    eta = (delta + delta_s / (n_sensors - 1)) / dim
    denom = delta * (n_sensors - 1) + delta_s
    zeta = delta_s / denom if denom > 0 else 0.0
    return eta, zeta


def lb_e_agdop(n_sensors: int, delta_s: float, delta_a: float, dim: int = 2) -> ConnectivityBound:
    """Closed-form lower bound on expected AGDOP from (N_S, delta_S, delta_A, d).

    (d^2/delta) * (N_S - 1 + delta_S/delta_A) / (N_S - 1 + delta_S/delta);
    d^2/delta_A for a single sensor; infinite when delta_A = 0.
    """
    n_sensors = int(n_sensors)
    delta_s = float(delta_s)
    delta_a = float(delta_a)
    if n_sensors < 1 or dim < 1:
        raise InfeasibleSpecError("need N_S >= 1 and d >= 1")
    if delta_s < 0 or delta_a < 0:
        raise InfeasibleSpecError("average degrees must be non-negative")
    if n_sensors == 1 and delta_s > 0:
        raise InfeasibleSpecError("a single sensor cannot have sensor links")

    delta = delta_s + delta_a
    eta, zeta = _eta_zeta(n_sensors, delta_s, delta, dim)
    if delta_a == 0.0:
        lb = math.inf
    elif n_sensors == 1:
        lb = dim * dim / delta_a
    else:
        lb = (dim * dim / delta) * (n_sensors - 1 + delta_s / delta_a) / (n_sensors - 1 + delta_s / delta)
    return ConnectivityBound(
        lb_e_agdop=lb, eta=eta, zeta=zeta, dim=int(dim),
        n_sensors=n_sensors, delta_s=delta_s, delta_a=delta_a,
    )


def trace_inverse_closed_form(n_sensors: int, eta: float, zeta: float) -> float:
    """tr[(eta (I - zeta 11^T))^-1] = (N_S/eta)(1 + zeta/(1 - N_S zeta))."""
    return (n_sensors / eta) * (1.0 + zeta / (1.0 - n_sensors * zeta))


def lb_via_direct_inverse(n_sensors: int, delta_s: float, delta_a: float, dim: int = 2) -> float:
    """d * tr[(E F_check)^-1] / N_S from a dense numerical inverse."""
    if n_sensors < 2:
        raise InfeasibleSpecError("direct-inverse oracle needs N_S >= 2")
    m = expected_fcheck(n_sensors, delta_s + delta_a, delta_s, dim)
    if is_numerically_singular(np.linalg.eigvalsh(m)):
        raise SingularMatrixError(
            f"E[F_check] is singular for N_S={n_sensors}, delta_s={delta_s:g}, delta_a={delta_a:g}"
        )
    inv = np.linalg.inv(m)
    return dim * float(np.trace(inv)) / n_sensors


# ---------------------------------------------------------------------------
# Statistical check of E[F^-1] >= [E F]^-1
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsdGapResult:
    min_eigenvalue: float
    gap: np.ndarray = field(repr=False)
    standard_error: Optional[float] = None
    n_samples: int = 0

    def passes(self, multiple: float = 10.0) -> bool:
        tol = multiple * (self.standard_error or 0.0)
        return self.min_eigenvalue >= -tol


def _min_gap_eig(inv_mean: np.ndarray, f_mean: np.ndarray) -> Tuple[float, np.ndarray]:
    gap = inv_mean - np.linalg.inv(f_mean)
    gap = 0.5 * (gap + gap.T)
    return float(np.linalg.eigvalsh(gap)[0]), gap


def psd_gap_check(
    samples: Union[Sequence[np.ndarray], np.ndarray],
    bootstrap: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> PsdGapResult:
    """Smallest eigenvalue of mean(F^-1) - [mean(F)]^-1 over a sample of SPD matrices.

    With bootstrap > 0 the standard error of that eigenvalue is estimated from
    `bootstrap` resamples drawn with `rng`.
    """
    stack = np.asarray(samples, dtype=float)
    if stack.ndim == 2:
        stack = stack[None, :, :]
    bad = [idx for idx, f in enumerate(stack) if is_numerically_singular(np.linalg.eigvalsh(f))]
    if bad:
        raise SingularSampleError(bad)
    inverses = np.linalg.inv(stack)
    min_eig, gap = _min_gap_eig(inverses.mean(axis=0), stack.mean(axis=0))

    se = None
    if bootstrap > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        n = stack.shape[0]
        reps = np.empty(bootstrap)
        for b in range(bootstrap):
            idx = rng.integers(0, n, size=n)
            reps[b], _ = _min_gap_eig(inverses[idx].mean(axis=0), stack[idx].mean(axis=0))
        se = float(reps.std(ddof=1)) if bootstrap > 1 else 0.0
    gap.setflags(write=False)
    return PsdGapResult(min_eigenvalue=min_eig, gap=gap, standard_error=se, n_samples=int(stack.shape[0]))
