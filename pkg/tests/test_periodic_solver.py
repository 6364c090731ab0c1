"""Shooting, multi-start search, verification and the lambda scan."""
from __future__ import annotations

from typing import List

import numpy as np
import pytest
from scipy.integrate import solve_bvp

from src.config import RunConfig, bundled_config
from src.errors import ConfigValidationError, PreconditionError
from src.integration.engine import PlanarState
from src.problem.weights import sign_decomposition
from src.solvers.orbits import OrbitClass, PeriodicOrbit, SearchWindow, ShootingConfig, sup_distance
from src.solvers.search import constant_seeds, deduplicate, find_two_solutions, scan_lambda, tent_seeds
from src.solvers.shooting import PeriodicSolver, fixed_point_residual
from src.solvers.verification import verify_orbit


def test_two_positive_solutions_at_lambda_two(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    assert len(trig_orbits) >= 2
    for orbit in trig_orbits:
        assert orbit.min_value > 0
        assert orbit.residual <= trig_solver.shooting.newton_tol
        assert orbit.monodromy_det == pytest.approx(1.0, abs=1e-6)
    smallest, largest = trig_orbits[0], trig_orbits[-1]
    assert smallest.sup_norm < largest.sup_norm
    assert sup_distance(smallest, largest) > trig_solver.shooting.delta_dup
    assert largest.orbit_class is OrbitClass.LARGE


def test_found_orbits_pass_verification(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    for orbit in trig_orbits:
        record = verify_orbit(orbit, trig_solver.problem, constants=trig_solver.constants)
        assert record.ok
        assert record.max_abs_derivative < 1.0
        assert record.as_dict()["passed"] == [True] * 5


def test_orbit_is_a_fixed_point_under_tighter_tolerances(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    tighter = trig_solver.integrator.tightened(100.0)
    for orbit in trig_orbits:
        assert fixed_point_residual(trig_solver, orbit, tighter) < 1e-7


def test_orbit_evaluation_is_periodic(trig_orbits: List[PeriodicOrbit]) -> None:
    orbit = trig_orbits[-1]
    times = np.linspace(0.0, orbit.period, 17)
    assert np.allclose(orbit.evaluate(times), orbit.evaluate(times + orbit.period), atol=1e-12)
    frame = orbit.samples_frame()
    assert list(frame.columns) == ["t", "u", "u_prime", "x2"]
    assert frame["u_prime"].abs().max() < 1.0


def test_finite_difference_jacobian_agrees(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    orbit = trig_orbits[-1]
    fd_solver = trig_solver.derive(jacobian="finite-difference")
    _, variational = trig_solver.poincare(2.0, 1, orbit.initial.as_array(), with_jacobian=True)
    _, finite = fd_solver.poincare(2.0, 1, orbit.initial.as_array(), with_jacobian=True)
    assert np.allclose(variational, finite, rtol=1e-4, atol=1e-5)


def test_multiple_shooting_reaches_the_same_orbit(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    target = trig_orbits[-1]
    segmented = trig_solver.derive(segments=4)
    orbit = segmented.newton_shoot(2.0, 1, target.initial)
    assert sup_distance(orbit, target) < 1e-6


def test_newton_shoot_preconditions(trig_solver: PeriodicSolver) -> None:
    with pytest.raises(PreconditionError):
        trig_solver.newton_shoot(0.0, 1, PlanarState(0.5, 0.0))
    with pytest.raises(PreconditionError):
        trig_solver.newton_shoot(2.0, 0, PlanarState(0.5, 0.0))
    with pytest.raises(PreconditionError):
        trig_solver.newton_shoot(2.0, 1, [np.nan, 0.0])


def test_seed_families_cover_the_window(trig_solver: PeriodicSolver) -> None:
    window = SearchWindow(r_min=0.01, r_max=10.0, n_small=5, n_large=3)
    constants = constant_seeds(window)
    assert constants[0].x1 == pytest.approx(0.01)
    assert constants[-1].x1 == pytest.approx(10.0)
    tents = tent_seeds(sign_decomposition(trig_solver.problem.weight), window, trig_solver.constants.rho_star)
    assert len(tents) == len(window.slopes) * window.n_large
    assert all(seed.x1 > 0 for seed in tents)


def test_deduplicate_keeps_one_per_cluster(trig_orbits: List[PeriodicOrbit]) -> None:
    doubled = list(trig_orbits) + list(trig_orbits)
    assert len(deduplicate(doubled, 1e-4)) == len(trig_orbits)


def test_configuration_validation() -> None:
    with pytest.raises(ConfigValidationError):
        ShootingConfig(jacobian="broyden")
    with pytest.raises(ConfigValidationError):
        SearchWindow(r_min=1.0, r_max=0.5)


@pytest.mark.slow
def test_no_positive_solution_for_small_lambda(trig_solver: PeriodicSolver) -> None:
    assert find_two_solutions(trig_solver, 0.05) == []


@pytest.mark.slow
def test_scan_brackets_the_two_solution_onset(trig_solver: PeriodicSolver) -> None:
    result = scan_lambda(trig_solver, [0.05, 2.0])
    assert list(result.table["n_orbits"])[0] == 0
    assert result.two_solution_onset == pytest.approx(2.0)
    assert result.empty_below == pytest.approx(0.05)
    assert result.bracket == (0.05, 2.0)
    assert result.lambda_star_upper == pytest.approx(trig_solver.constants.lambda_star_upper)


@pytest.mark.slow
def test_orbits_agree_with_collocation(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    problem = trig_solver.problem
    period = problem.period

    def rhs(t: np.ndarray, y: np.ndarray) -> np.ndarray:
        force = np.where(y[0] <= 0.0, -y[0], 2.0 * problem.weight.value(t) * problem.nonlinearity.value(y[0]))
        return np.vstack([y[1] / np.sqrt(1.0 + y[1] ** 2), -force])

    def periodic(ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
        return ya - yb

    mesh = np.linspace(0.0, period, 2048)
    for orbit in trig_orbits:
        guess = orbit.evaluate(mesh)
        solution = solve_bvp(rhs, periodic, mesh, guess, tol=1e-10, max_nodes=100000)
        assert solution.success
        difference = solution.sol(mesh)[0] - orbit.evaluate(mesh)[0]
        assert np.max(np.abs(difference)) < 1e-6


@pytest.mark.slow
def test_step_weight_config_has_two_orbits_at_lambda_five() -> None:
    config = RunConfig.from_file(bundled_config("step_weight"))
    assert config.lam == 5.0
    solver = PeriodicSolver(config.problem, integrator=config.integrator, shooting=config.shooting)
    orbits = find_two_solutions(solver, config.lam, config.window)
    assert len(orbits) >= 2
    assert all(orbit.min_value > 0 for orbit in orbits)
    largest = orbits[-1]
    assert largest.orbit_class is OrbitClass.LARGE
    verify_orbit(largest, config.problem)

    problem = config.problem

    def rhs(t: np.ndarray, y: np.ndarray) -> np.ndarray:
        force = np.where(y[0] <= 0.0, -y[0], 5.0 * problem.weight.value(t) * problem.nonlinearity.value(y[0]))
        return np.vstack([y[1] / np.sqrt(1.0 + y[1] ** 2), -force])

    def periodic(ya: np.ndarray, yb: np.ndarray) -> np.ndarray:
        return ya - yb

    # breakpoints of the weight are mesh nodes so no interval straddles a jump
    mesh = np.union1d(np.linspace(0.0, problem.period, 4096), [1.0, 2.0, 3.0])
    solution = solve_bvp(rhs, periodic, mesh, largest.evaluate(mesh), tol=1e-7, max_nodes=400000)
    assert solution.success
    difference = solution.sol(mesh)[0] - largest.evaluate(mesh)[0]
    assert np.max(np.abs(difference)) < 1e-4
