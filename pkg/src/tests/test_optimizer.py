import math
from functools import lru_cache

import numpy as np
import pytest

from src.dop import agdop_at, lb_e_agdop, single_sensor_gdop
from src.errors import AllRestartsSingularError, InfeasibleSpecError
from src.network import NetworkTopology, degree_summary, validate_topology
from src.optimizer import (
    OptimizationProblem,
    canonicalize,
    minimize_agdop,
    optimal_single_sensor_angles,
    single_sensor_star,
    reference_case,
)

# reduced budget; the reference cases settle well within it
RESTARTS = 24


@lru_cache(maxsize=None)
def _solve_case(case: int):
    return minimize_agdop(OptimizationProblem(reference_case(case)), restarts=RESTARTS, seed=7)


@pytest.mark.parametrize(
    "case,n_s,n_a,ds,da",
    [(1, 2, 4, 1, 2), (2, 2, 6, 1, 3), (3, 3, 3, 2, 1), (4, 3, 6, 2, 2)],
)
def test_reference_case_topologies(case, n_s, n_a, ds, da):
    t = reference_case(case)
    assert (t.n_sensors, t.n_anchors) == (n_s, n_a)
    assert validate_topology(t) == []
    s = degree_summary(t)
    assert (s.delta_s, s.delta_a) == (ds, da)


def test_unknown_case_rejected():
    with pytest.raises(InfeasibleSpecError):
        reference_case(5)


def test_uniform_angles():
    angles = optimal_single_sensor_angles(3)
    assert angles.tolist() == pytest.approx([2 * math.pi / 3, 4 * math.pi / 3, 2 * math.pi])
    assert single_sensor_gdop(angles) == pytest.approx(4 / 3)
    assert single_sensor_gdop(optimal_single_sensor_angles(4)) == pytest.approx(1.0)
    assert single_sensor_gdop(optimal_single_sensor_angles(2)) == math.inf


@pytest.mark.parametrize("n_a", range(3, 10))
def test_single_sensor_optimum(n_a):
    result = minimize_agdop(OptimizationProblem(single_sensor_star(n_a)), restarts=8, seed=1)
    assert result.best_agdop == pytest.approx(4 / n_a, abs=1e-3)
    coords = result.best_positions.coords
    directions = coords[1:] - coords[0]
    theta = np.arctan2(directions[:, 1], directions[:, 0])
    # GDOP = 4 N_A / (N_A^2 - |sum e^{2i theta}|^2); optimal iff the doubled angles cancel out
    resultant = abs(np.exp(2j * theta).sum())
    assert resultant ** 2 <= n_a ** 3 * 1e-3 / 4
    assert 4 * n_a / (n_a ** 2 - resultant ** 2) == pytest.approx(result.best_agdop, rel=1e-9)


@pytest.mark.parametrize(
    "case,expected,tol",
    [(1, 1.633, 0.005), (2, 1.124, 0.01), (3, 2.667, 0.01), (4, 1.313, 0.005)],
)
def test_reference_case_minimum(case, expected, tol):
    topology = reference_case(case)
    result = _solve_case(case)
    assert result.best_agdop == pytest.approx(expected, abs=tol)
    s = degree_summary(topology)
    assert result.best_agdop >= lb_e_agdop(topology.n_sensors, s.delta_s, s.delta_a).lb_e_agdop


def test_case_four_inner_angle():
    result = _solve_case(4)
    p = result.best_positions.coords[:3]
    angles = []
    for k in range(3):
        a, b = p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]
        angles.append(math.degrees(math.acos(np.dot(a, b) / np.linalg.norm(a) / np.linalg.norm(b))))
    assert any(abs(x - 104.15) < 1.0 for x in angles)


def test_repeatable_for_fixed_seed():
    problem = OptimizationProblem(reference_case(1))
    a = minimize_agdop(problem, restarts=3, seed=11, max_evals=3000)
    b = minimize_agdop(problem, restarts=3, seed=11, max_evals=3000)
    assert a.best_agdop == b.best_agdop
    assert a.restart_values == b.restart_values
    assert np.array_equal(a.best_positions.coords, b.best_positions.coords)


def test_workers_do_not_change_the_result():
    problem = OptimizationProblem(single_sensor_star(4))
    a = minimize_agdop(problem, restarts=4, seed=2, max_evals=2000, workers=1)
    b = minimize_agdop(problem, restarts=4, seed=2, max_evals=2000, workers=3)
    assert a.best_agdop == b.best_agdop and a.best_restart == b.best_restart


def test_gauge_and_canonical_form():
    problem = OptimizationProblem(reference_case(2))
    result = minimize_agdop(problem, restarts=2, seed=5, max_evals=4000)
    coords = result.best_positions.coords
    assert np.allclose(coords[0], 0.0)
    assert coords[1, 0] >= 0 and coords[1, 1] == 0.0
    off_axis = [row for row in coords[2:] if abs(row[1]) > 1e-12]
    assert off_axis[0][1] > 0


def test_agdop_invariant_under_similarity():
    topology = reference_case(4)
    result = minimize_agdop(OptimizationProblem(topology), restarts=2, seed=3, max_evals=4000)
    coords = result.best_positions.coords
    c, s = math.cos(0.7), math.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    moved = 3.5 * coords @ rot.T + np.array([10.0, -4.0])
    assert agdop_at(topology, moved) == pytest.approx(result.best_agdop, abs=1e-10)
    assert agdop_at(topology, canonicalize(coords * [1, -1])) == pytest.approx(result.best_agdop, abs=1e-10)


def test_pack_unpack_moves_into_gauge():
    problem = OptimizationProblem(reference_case(1))
    rng = np.random.default_rng(0)
    coords = rng.random((6, 2))
    fixed = problem.unpack(problem.pack(coords))
    assert np.allclose(fixed[0], 0.0)
    assert fixed[1, 1] == 0.0
    assert agdop_at(problem.topology, fixed) == pytest.approx(agdop_at(problem.topology, coords), rel=1e-9)


def test_underdetermined_problem_rejected():
    with pytest.raises(InfeasibleSpecError):
        OptimizationProblem(single_sensor_star(1))


def test_structurally_singular_topology_fails_every_restart():
    # sensor 2 hangs on a single link
    topology = NetworkTopology.from_one_based(2, 3, [(1, 3), (1, 4), (1, 5), (1, 2)])
    with pytest.raises(AllRestartsSingularError) as exc:
        minimize_agdop(OptimizationProblem(topology), restarts=3, seed=0, max_evals=200)
    assert exc.value.restarts == 3
