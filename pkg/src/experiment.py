"""
Monte-Carlo harness: per-configuration AGDOP statistics against the connectivity bound.

Trial t of grid point i draws its instance from derive_stream(seed, i, t), so a
sweep is reproducible bit for bit whatever the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.dop import agdop_at, build_geometry_matrix, compute_dop, lb_e_agdop
from src.errors import (
    AllTrialsSingularError,
    ColocError,
    EmptySampleError,
    InfeasibleSpecError,
)
from src.lateration import empirical_error_covariance
from src.logging_config import setup_logger
from src.network import degree_summary
from src.randgraph import GraphModelSpec, derive_stream, generate
from src.settings import DEFAULT_SEED

logger = setup_logger(__name__)

Policy = Literal["exclude", "propagate"]
PointValue = Union[str, int, float]

DEFAULT_TRIALS = 2000
HUGE_AGDOP = 100.0
TUKEY_FENCE = 1.5
COVARIANCE_TRIALS = 200
# range noise of the covariance check must not share streams with instance draws
NOISE_DOMAIN = 1


class ExperimentConfig(BaseModel):
    """Resolved experiment: one raw field dict per grid point plus shared settings.

    Points stay unvalidated here; run_sweep validates each one and records
    failures per point.
    """

    model_config = ConfigDict(frozen=True)

    points: List[Dict[str, PointValue]] = Field(default_factory=list)
    trials: int = Field(default=DEFAULT_TRIALS, ge=1)
    seed: int = DEFAULT_SEED
    dim: int = Field(default=2, ge=1)
    sigma: Optional[float] = Field(default=None, gt=0)
    policy: Policy = "exclude"
    label: str = ""


@dataclass(frozen=True)
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    whisker_high: float
    n_outliers: int


@dataclass(frozen=True)
class DegreeBin:
    """Trials sharing one realized (delta_S, delta_A), paired with the bound at those degrees."""

    delta_s: float
    delta_a: float
    trials: int
    lb: float
    agdop_mean: float
    agdop_min: float


@dataclass(frozen=True)
class ConfigSummary:
    model: str
    params: str
    n_sensors: int
    n_anchors: int
    trials: int
    delta_s: Optional[float] = None
    delta_a: Optional[float] = None
    lb: Optional[float] = None
    agdop_mean: Optional[float] = None
    agdop_min: Optional[float] = None
    agdop_q1: Optional[float] = None
    agdop_median: Optional[float] = None
    agdop_q3: Optional[float] = None
    agdop_max: Optional[float] = None
    whisker_high: Optional[float] = None
    n_outliers: int = 0
    singular_fraction: Optional[float] = None
    huge_fraction: Optional[float] = None
    likely_infinite: bool = False
    covariance_ratio: Optional[float] = None
    lb_at_min: Optional[float] = None
    bins: Tuple[DegreeBin, ...] = ()
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def quantiles(samples: Sequence[float], q: Union[float, Sequence[float]]) -> np.ndarray:
    """Linear-interpolation quantiles on the sorted sample, endpoints inclusive."""
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySampleError("quantiles of an empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("quantiles need finite samples")
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((qs < 0.0) | (qs > 1.0)):
        raise ValueError("quantile levels must lie in [0, 1]")
    return np.quantile(arr, qs, method="linear")


def _quantiles_with_inf(samples: np.ndarray, qs: Sequence[float]) -> np.ndarray:
    """Same rule as quantiles, but +inf samples sort last and propagate."""
    s = np.sort(samples)
    out = []
    for q in qs:
        h = (s.size - 1) * q
        lo, hi = int(math.floor(h)), int(math.ceil(h))
        if hi == lo or s[hi] == s[lo]:
            out.append(float(s[lo]))
        else:
            out.append(float(s[lo] + (s[hi] - s[lo]) * (h - lo)))
    return np.array(out)


def box_stats(samples: Sequence[float]) -> BoxStats:
    """Five-number summary with the Tukey upper fence q3 + 1.5 IQR."""
    arr = np.asarray(samples, dtype=float).ravel()
    q1, med, q3 = quantiles(arr, [0.25, 0.5, 0.75])
    fence = q3 + TUKEY_FENCE * (q3 - q1)
    inside = arr[arr <= fence]
    return BoxStats(
        minimum=float(arr.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(arr.max()),
        whisker_high=float(inside.max()),
        n_outliers=int(np.count_nonzero(arr > fence)),
    )


def likely_infinite(lb: float, dim: int) -> bool:
    """Practical-connectivity rule: E-AGDOP is likely infinite when lb > d^2/(d+2)."""
    return lb > dim * dim / (dim + 2.0)


def _trial(spec: GraphModelSpec, seed: int, point: int, t: int) -> Tuple[float, float, float]:
    topology, positions = generate(spec, derive_stream(seed, point, t))
    degrees = degree_summary(topology)
    return agdop_at(topology, positions.coords), degrees.delta_s, degrees.delta_a


def _covariance_ratio(spec: GraphModelSpec, sigma: float, seed: int, point: int, trials: int) -> Optional[float]:
    """tr(Cov)/sigma^2 over N_S*AGDOP on the first non-singular instance of the point."""
    for t in range(trials):
        topology, positions = generate(spec, derive_stream(seed, point, t))
        report = compute_dop(build_geometry_matrix(topology, positions))
        if report.singular:
            continue
        est = empirical_error_covariance(
            topology, positions.anchors(topology.n_sensors), positions, sigma,
            trials=COVARIANCE_TRIALS, seed=seed, stream_prefix=(point,), domain=NOISE_DOMAIN,
        )
        if est.used < 2:
            return None
        return float(np.trace(est.covariance)) / sigma ** 2 / report.gdop
    return None


def degree_bins(
    spec: GraphModelSpec, values: np.ndarray, delta_s: np.ndarray, delta_a: np.ndarray,
) -> Tuple[DegreeBin, ...]:
    """Group non-singular trials by their realized (delta_S, delta_A), each bin with its own bound.

    Every instance's AGDOP is at least lb_e_agdop at that instance's degrees, so each
    bin's minimum and mean sit at or above the bin's lb.
    """
    n_s = spec.n_sensors
    # (2 K_S, K_A) identifies the realized degrees exactly
    keys = np.column_stack([np.rint(delta_s * n_s), np.rint(delta_a * n_s)]).astype(int)
    finite = np.isfinite(values)
    bins: List[DegreeBin] = []
    for two_ks, k_a in sorted({(int(a), int(b)) for a, b in keys[finite]}):
        mask = finite & (keys[:, 0] == two_ks) & (keys[:, 1] == k_a)
        members = values[mask]
        d_s, d_a = two_ks / n_s, k_a / n_s
        bins.append(DegreeBin(
            delta_s=d_s,
            delta_a=d_a,
            trials=int(np.count_nonzero(mask)),
            lb=lb_e_agdop(n_s, d_s, d_a, spec.dim).lb_e_agdop,
            agdop_mean=float(members.mean()),
            agdop_min=float(members.min()),
        ))
    return tuple(bins)


def run_config(
    spec: GraphModelSpec,
    trials: int,
    seed: int = DEFAULT_SEED,
    point_index: int = 0,
    policy: Policy = "exclude",
    workers: int = 1,
    sigma: Optional[float] = None,
) -> ConfigSummary:
    """AGDOP statistics for one graph-model point.

    lb comes from the mean realized degrees of the trials the statistics cover
    (the non-singular ones under "exclude"); lb_at_min and bins pair samples with
    the bound at their own degrees.
    """
    if trials < 1:
        raise InfeasibleSpecError("need at least one trial")
    extra = {"seed": seed, "point": point_index}
    logger.info(f"point {point_index}: {spec.model} {spec.param_label()} N_S={spec.n_sensors}, {trials} trials", extra=extra)

    def _one(t: int) -> Tuple[float, float, float]:
        return _trial(spec, seed, point_index, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one, range(trials)))
    else:
        results = [_one(t) for t in range(trials)]

    values = np.array([r[0] for r in results], dtype=float)
    trial_ds = np.array([r[1] for r in results], dtype=float)
    trial_da = np.array([r[2] for r in results], dtype=float)
    singular = ~np.isfinite(values)
    n_singular = int(np.count_nonzero(singular))
    if n_singular == trials:
        raise AllTrialsSingularError(f"all {trials} trials of point {point_index} are singular")
    if n_singular:
        logger.debug(f"{n_singular} of {trials} trials singular", extra=extra)

    finite = values[~singular]
    box = box_stats(finite)
    if policy == "propagate" and n_singular:
        q1, med, q3 = _quantiles_with_inf(values, [0.25, 0.5, 0.75])
        mean, vmax = math.inf, math.inf
        pooled = np.ones(trials, dtype=bool)
    else:
        q1, med, q3 = box.q1, box.median, box.q3
        mean, vmax = float(finite.mean()), box.maximum
        pooled = ~singular
    ds = float(trial_ds[pooled].mean())
    da = float(trial_da[pooled].mean())

    bound = lb_e_agdop(spec.n_sensors, ds, da, spec.dim).lb_e_agdop
    best = int(np.argmin(np.where(singular, math.inf, values)))
    bound_at_min = lb_e_agdop(spec.n_sensors, trial_ds[best], trial_da[best], spec.dim).lb_e_agdop
    ratio = _covariance_ratio(spec, sigma, seed, point_index, trials) if sigma else None
    summary = ConfigSummary(
        model=spec.model,
        params=spec.param_label(),
        n_sensors=spec.n_sensors,
        n_anchors=spec.n_anchors,
        trials=trials,
        delta_s=ds,
        delta_a=da,
        lb=bound,
        agdop_mean=mean,
        agdop_min=box.minimum,
        agdop_q1=float(q1),
        agdop_median=float(med),
        agdop_q3=float(q3),
        agdop_max=vmax,
        whisker_high=box.whisker_high,
        n_outliers=box.n_outliers,
        singular_fraction=n_singular / trials,
        huge_fraction=float(np.count_nonzero(singular | (values > HUGE_AGDOP))) / trials,
        likely_infinite=likely_infinite(bound, spec.dim),
        covariance_ratio=ratio,
        lb_at_min=bound_at_min,
        bins=degree_bins(spec, values, trial_ds, trial_da),
    )
    logger.info(f"point {point_index}: lb={bound:.6g} mean={mean:.6g} min={box.minimum:.6g}", extra=extra)
    return summary


def _failed_row(raw: Dict[str, PointValue], trials: int, status: str) -> ConfigSummary:
    def _int(key: str) -> int:
        try:
            return int(raw.get(key, 0))
        except (TypeError, ValueError):
            return 0

    params = ";".join(f"{k}={raw[k]}" for k in ("p", "r", "k", "delta_s", "delta_a") if k in raw)
    return ConfigSummary(
        model=str(raw.get("model", "")),
        params=params,
        n_sensors=_int("n_sensors"),
        n_anchors=_int("n_anchors"),
        trials=trials,
        status=status,
    )


def point_spec(raw: Dict[str, PointValue], dim: int) -> GraphModelSpec:
    fields = dict(raw)
    placement = fields.pop("anchors", None)
    if placement is not None:
        fields["anchor_placement"] = placement
    fields.setdefault("dim", dim)
    return GraphModelSpec(**fields)


def _run_point(config: ExperimentConfig, index: int, raw: Dict[str, PointValue], workers: int) -> ConfigSummary:
    extra = {"point": index, "seed": config.seed}
    try:
        spec = point_spec(raw, config.dim)
        return run_config(
            spec, config.trials, config.seed, index,
            policy=config.policy, workers=workers, sigma=config.sigma,
        )
    except ValidationError as e:
        msg = "; ".join(err["msg"] for err in e.errors())
        logger.error(f"point {index} infeasible: {msg}", extra=extra)
        return _failed_row(raw, config.trials, f"infeasible: {msg}")
    except InfeasibleSpecError as e:
        logger.error(f"point {index} infeasible: {e}", extra=extra)
        return _failed_row(raw, config.trials, f"infeasible: {e}")
    except AllTrialsSingularError as e:
        logger.error(str(e), extra=extra)
        return _failed_row(raw, config.trials, "all-singular")
    except ColocError as e:
        logger.error(f"point {index} failed: {e}", extra=extra)
        return _failed_row(raw, config.trials, f"error: {e}")


def run_sweep(
    config: ExperimentConfig,
    workers: int = 1,
    on_point: Optional[Callable[[int, ConfigSummary], None]] = None,
) -> List[ConfigSummary]:
    """run_config for every grid point in order; a failing point becomes a status row."""
    rows: List[ConfigSummary] = []
    for index, raw in enumerate(config.points):
        row = _run_point(config, index, raw, workers)
        rows.append(row)
        if on_point is not None:
            on_point(index, row)
    return rows
