"""Planar flow integration."""
from __future__ import annotations

import numpy as np
import pytest

from src.errors import ConfigValidationError
from src.integration.engine import (
    IntegratorConfig,
    PlanarState,
    forced_mesh,
    hamiltonian,
    integrate,
    second_derivative_residual,
)
from src.problem.model import Problem
from src.problem.nonlinearity import NonlinearitySpec
from src.problem.weights import WeightSpec


def test_energy_is_conserved_for_constant_weight() -> None:
    problem = Problem(WeightSpec.constant(1.0), NonlinearitySpec.power(3.0))
    trajectory = integrate(problem, 1.0, 0.0, 3.0, PlanarState(0.5, 0.0))
    times, states = trajectory.sample(400)
    energy = hamiltonian(problem, 1.0, times, states[0], states[1])
    assert np.max(np.abs(energy - energy[0])) < 1e-9


def test_variational_flow_is_area_preserving(trig_problem: Problem) -> None:
    rng = np.random.default_rng(7)
    x0 = rng.uniform(0.1, 1.0, size=2)
    trajectory = integrate(trig_problem, 2.0, 0.0, trig_problem.period, x0, with_variational=True)
    assert np.linalg.det(trajectory.fundamental_matrix) == pytest.approx(1.0, abs=1e-6)


def test_splitting_at_breakpoint_is_bit_identical(step_problem: Problem) -> None:
    x0 = PlanarState(0.4, 0.1)
    whole = integrate(step_problem, 5.0, 0.0, 10.0, x0)
    first = integrate(step_problem, 5.0, 0.0, 3.0, x0)
    second = integrate(step_problem, 5.0, 3.0, 10.0, first.final_vector)
    assert np.array_equal(whole.final_vector, second.final_vector)


def test_backward_integration_returns_to_start(trig_problem: Problem) -> None:
    forward = integrate(trig_problem, 2.0, 0.0, 3.0, PlanarState(0.3, -0.2))
    backward = integrate(trig_problem, 2.0, 3.0, 0.0, forward.final_vector)
    assert np.allclose(backward.final_vector, [0.3, -0.2], atol=1e-8)


@pytest.mark.parametrize(
    ("problem_name", "lam", "state"),
    [("trig_problem", 2.0, (0.3, -0.2)), ("step_problem", 5.0, (0.2, 0.0))],
)
def test_halving_tolerances_is_self_convergent(
    problem_name: str, lam: float, state: tuple, request: pytest.FixtureRequest
) -> None:
    problem: Problem = request.getfixturevalue(problem_name)
    coarse = IntegratorConfig()
    fine = coarse.tightened(2.0)
    first = integrate(problem, lam, 0.0, problem.period, PlanarState(*state), coarse)
    second = integrate(problem, lam, 0.0, problem.period, PlanarState(*state), fine)
    scale = max(1.0, float(np.max(np.abs(first.states[:, :2]))))
    bound = 10 * (coarse.abs_tol + coarse.rel_tol * scale)
    assert np.max(np.abs(first.final_vector[:2] - second.final_vector[:2])) < bound


def test_lambda_aware_cap_adds_interval_ends(trig_problem: Problem) -> None:
    config = IntegratorConfig()
    assert forced_mesh(trig_problem, 2.0, 0.0, trig_problem.period, config).size == 0
    mesh = forced_mesh(trig_problem, 1e4, 0.0, trig_problem.period, config)
    assert mesh == pytest.approx([np.pi / 2])


def test_dense_output_matches_steps(trig_problem: Problem) -> None:
    trajectory = integrate(trig_problem, 2.0, 0.0, trig_problem.period, PlanarState(0.2, 0.0))
    assert np.allclose(trajectory(trajectory.times)[:2], trajectory.states.T[:2], atol=1e-12)
    assert trajectory.fundamental_matrix is None
    assert second_derivative_residual(trajectory, trig_problem, 2.0) < 1e-6


def test_integrator_config_validation() -> None:
    with pytest.raises(ConfigValidationError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ConfigValidationError):
        IntegratorConfig(method="LSODA")
    tight = IntegratorConfig().tightened(100.0)
    assert tight.rel_tol == pytest.approx(1e-12)
