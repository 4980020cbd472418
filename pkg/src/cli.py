"""
Command-line surface: lb, dop, simulate, optimize, locate.

run(argv) returns the process exit code: 0 on success (singular or infinite
results included), 2 on input errors, 3 on computational failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from src import __version__
from src.dop import build_geometry_matrix, compute_dop, lb_e_agdop, single_sensor_gdop
from src.errors import EXIT_INPUT, EXIT_OK, ColocError, TopologyError
from src.experiment import ConfigSummary, run_sweep
from src.instance_io import Instance, parse_experiment_config, read_instance
from src.lateration import (
    DEFAULT_MAX_ITER,
    DEFAULT_STEP_TOL,
    RangeMeasurementSet,
    solve_wls,
    synthesize_measurements,
)
from src.logging_config import setup_logger
from src.network import degree_summary, validate_topology
from src.optimizer import (
    DEFAULT_MAX_EVALS,
    DEFAULT_RESTARTS,
    DEFAULT_TOL,
    OptimizationProblem,
    minimize_agdop,
    optimal_single_sensor_angles,
    single_sensor_star,
    reference_case,
)
from src.randgraph import derive_stream
from src.schema import LocateReport, OptimizeReport, RunManifest
from src.settings import DEFAULT_SEED, Settings
from src.terminal import StatusReporter
from src.utils.text import format_sig, json_number

logger = setup_logger(__name__)

SUMMARY_COLUMNS = (
    "model", "params", "n_sensors", "delta_s", "delta_a", "lb",
    "agdop_mean", "agdop_min", "agdop_q1", "agdop_median", "agdop_q3", "agdop_max",
    "singular_fraction", "trials",
    "n_anchors", "likely_infinite", "huge_fraction", "whisker_high", "n_outliers",
    "covariance_ratio", "lb_at_min", "status",
)
BIN_COLUMNS = ("point", "delta_s", "delta_a", "trials", "lb", "agdop_mean", "agdop_min")


def _emit_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def _load_valid_instance(path: str) -> Instance:
    try:
        instance = read_instance(path)
    except OSError as e:
        raise TopologyError(f"cannot read {path}: {e.strerror or e}") from e
    violations = validate_topology(instance.topology)
    if violations:
        raise TopologyError("; ".join(f"{v.kind}: {v.message}" for v in violations))
    return instance


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_lb(args: argparse.Namespace) -> int:
    bound = lb_e_agdop(args.ns, args.ds, args.da, args.dim)
    _emit_json(bound.as_dict())
    return EXIT_OK


def cmd_dop(args: argparse.Namespace) -> int:
    instance = _load_valid_instance(args.file)
    report = compute_dop(build_geometry_matrix(instance.topology, instance.positions))
    if report.singular:
        logger.info(f"{args.file}: singular geometry", extra={"command": "dop"})
    _emit_json(report.as_dict(sqrt=args.sqrt))
    return EXIT_OK


def write_summary_csv(path: Path, rows: Sequence[ConfigSummary]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            data = row.as_dict()
            writer.writerow([format_sig(data[c]) if not isinstance(data[c], str) else data[c] for c in SUMMARY_COLUMNS])
    return path


def write_bins_csv(path: Path, rows: Sequence[ConfigSummary]) -> Path:
    """One line per realized-degree bin of every grid point."""
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(BIN_COLUMNS)
        for index, row in enumerate(rows):
            for b in row.bins:
                writer.writerow([index] + [format_sig(getattr(b, c)) for c in BIN_COLUMNS[1:]])
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_simulate(args: argparse.Namespace) -> int:
    config = parse_experiment_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    out_dir = Path(args.out) if args.out else args.settings.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    reporter = StatusReporter()
    total = len(config.points)
    reporter.info(f"simulate: {total} grid points x {config.trials} trials, seed {config.seed}")
    rows = run_sweep(config, workers=args.threads, on_point=lambda i, row: reporter.point(i, total, row))

    summary = write_summary_csv(out_dir / "summary.csv", rows)
    bins = write_bins_csv(out_dir / "bins.csv", rows)
    manifest = RunManifest(
        tool_version=__version__,
        command="simulate",
        config=config.model_dump(),
        seed=config.seed,
        timestamp=datetime.now(timezone.utc).isoformat(),
        outputs={summary.name: _sha256(summary), bins.name: _sha256(bins)},
    )
    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")

    failed = sum(1 for r in rows if not r.ok)
    if failed:
        reporter.warning(f"{failed} of {total} points failed; see the status column")
    reporter.success(f"wrote {summary}, {bins} and {out_dir / 'manifest.json'}")
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    dim = 2
    uniform = None
    if args.case is not None:
        topology = reference_case(args.case)
    elif args.single is not None:
        topology = single_sensor_star(args.single)
        if args.single >= 2:
            uniform = json_number(single_sensor_gdop(optimal_single_sensor_angles(args.single)))
    else:
        instance = _load_valid_instance(args.topology)
        topology, dim = instance.topology, instance.dim

    problem = OptimizationProblem(topology, dim)
    result = minimize_agdop(
        problem, restarts=args.restarts, seed=args.seed_value,
        tol=args.tol, max_evals=args.max_evals, workers=args.threads,
    )
    degrees = degree_summary(topology)
    bound = lb_e_agdop(topology.n_sensors, degrees.delta_s, degrees.delta_a, dim)
    report = OptimizeReport(
        case=args.case,
        n_sensors=topology.n_sensors,
        n_anchors=topology.n_anchors,
        dim=dim,
        best_agdop=result.best_agdop,
        lb=json_number(bound.lb_e_agdop),
        positions=result.best_positions.coords.tolist(),
        best_restart=result.best_restart,
        restarts=args.restarts,
        singular_restarts=result.singular_restarts,
        evaluations=result.evaluations,
        uniform_angles_gdop=uniform,
    )
    print(report.model_dump_json(indent=2))
    return EXIT_OK


def cmd_locate(args: argparse.Namespace) -> int:
    instance = _load_valid_instance(args.file)
    topology, positions = instance.topology, instance.positions
    n_s = topology.n_sensors
    anchors = positions.anchors(n_s)

    truth = None
    if instance.has_ranges:
        sigma = instance.sigma if instance.sigma is not None else np.ones(topology.n_links)
        measurements = RangeMeasurementSet(rho=instance.rho, sigma=sigma)
        guess = positions.sensors(n_s)
    else:
        truth = positions.sensors(n_s)
        if args.sigma > 0:
            measurements = synthesize_measurements(topology, positions, args.sigma, derive_stream(args.seed_value, 0))
        else:
            r = positions.link_distances(topology)
            measurements = RangeMeasurementSet(rho=r, sigma=np.ones(r.size), true_distances=r)
        jitter = derive_stream(args.seed_value, 1).uniform(-1.0, 1.0, size=truth.shape)
        guess = truth + args.perturb * jitter

    result = solve_wls(topology, anchors, measurements, guess, max_iter=args.max_iter, step_tol=args.step_tol)
    error_norm = None if truth is None else float(np.linalg.norm(result.estimate - truth))
    report = LocateReport(
        converged=result.converged,
        iterations=result.iterations,
        reason=result.reason,
        singular=result.singular,
        diverged=result.diverged,
        residual_norm=json_number(result.residual_norm),
        step_norms=[float(s) for s in result.step_norms],
        positions=result.estimate.tolist(),
        synthetic=truth is not None,
        error_norm=error_norm,
    )
    print(report.model_dump_json(indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coloc",
        description="Dilution of precision and connectivity bounds for cooperative localization.",
    )
    parser.add_argument("-env", type=str, default=None, help="Set environment mode: prod or debug (sets logger level)")
    parser.add_argument("--health", action="store_true", help="Run environment health checks and exit")
    parser.add_argument("--seed", type=int, default=None, help=f"Master seed (default {DEFAULT_SEED})")
    parser.add_argument("--threads", type=_positive_int, default=None, help="Worker cap (default COLOC_THREADS or 1)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("lb", help="Closed-form lower bound on expected AGDOP")
    p.add_argument("--ns", type=_positive_int, required=True, help="number of sensors N_S")
    p.add_argument("--ds", type=_non_negative, default=0.0, help="average sensor degree")
    p.add_argument("--da", type=_non_negative, required=True, help="average anchor degree")
    p.add_argument("--dim", type=_positive_int, default=2)
    p.set_defaults(handler=cmd_lb)

    p = sub.add_parser("dop", help="DOP report of an instance file")
    p.add_argument("file")
    p.add_argument("--sqrt", action="store_true", help="also show square-root GDOP/AGDOP")
    p.set_defaults(handler=cmd_dop)

    p = sub.add_parser("simulate", help="Monte-Carlo sweep from a config file")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (default COLOC_OUT_DIR or results)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("optimize", help="Minimum-AGDOP geometry for a topology")
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--case", type=int, choices=(1, 2, 3, 4), help="reference multi-sensor case")
    target.add_argument("--single", type=_positive_int, metavar="N_A", help="one sensor linked to N_A anchors")
    target.add_argument("--topology", metavar="FILE", help="instance file (coordinates ignored)")
    p.add_argument("--restarts", type=_positive_int, default=DEFAULT_RESTARTS)
    p.add_argument("--max-evals", type=_positive_int, default=DEFAULT_MAX_EVALS)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("locate", help="Newton-Raphson lateration of an instance")
    p.add_argument("file")
    p.add_argument("--sigma", type=_non_negative, default=0.0, help="noise for synthesized ranges")
    p.add_argument("--perturb", type=_non_negative, default=0.05, help="initial-guess offset from truth")
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    p.add_argument("--step-tol", type=float, default=DEFAULT_STEP_TOL)
    p.set_defaults(handler=cmd_locate)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.health:
        from src.utils.health import healthcheck_env

        ok, messages = healthcheck_env()
        print("HEALTHCHECK")
        for m in messages:
            print(f"- {m}")
        print("RESULT:", "OK" if ok else "FAIL")
        return 0 if ok else 1

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INPUT

    try:
        args.settings = Settings.from_env()
    except ValueError as e:
        print(f"error: invalid environment: {e}", file=sys.stderr)
        return EXIT_INPUT
    args.seed_value = args.seed if args.seed is not None else DEFAULT_SEED
    if args.threads is None:
        args.threads = args.settings.threads

    extra = {"command": args.command, "seed": args.seed_value}
    logger.info(f"{args.command} started", extra=extra)
    try:
        code = args.handler(args)
    except ColocError as e:
        StatusReporter().error(f"{args.command} failed: {e}", extra=extra)
        return e.exit_code
    logger.info(f"{args.command} finished", extra=extra)
    return code
