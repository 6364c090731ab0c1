"""Operator, weight, nonlinearity and threshold checks."""
from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ConfigValidationError, CurvatureDomainError, DegreeUndefined, NoAdmissibleRho
from src.problem.curvature import CurvatureOperator, phi, phi_inverse
from src.problem.model import Problem
from src.problem.nonlinearity import NonlinearitySpec
from src.problem.thresholds import (
    average_map_degree,
    small_orbit_bound_check,
    rho_constraints_hold,
    threshold_constants,
)
from src.problem.weights import WeightSpec, sign_decomposition, weight_analysis


def test_phi_and_inverse_are_mutual_inverses() -> None:
    xi = np.linspace(-0.99, 0.99, 41)
    assert np.allclose(phi_inverse(phi(xi)), xi, atol=1e-14)
    assert phi(0.5) == pytest.approx(0.5 / math.sqrt(0.75))
    assert isinstance(phi_inverse(3.0), float)


def test_curvature_module_exports_phi_and_its_inverse() -> None:
    import src.problem.curvature as curvature

    assert curvature.phi is CurvatureOperator.phi
    assert curvature.phi_inverse is CurvatureOperator.phi_inverse
    assert not hasattr(curvature, "phi_inverse_prime")
    assert not hasattr(CurvatureOperator, "phi_inverse_prime")


def test_phi_rejects_points_outside_open_interval() -> None:
    with pytest.raises(CurvatureDomainError):
        phi(1.0)
    with pytest.raises(CurvatureDomainError):
        CurvatureOperator.phi_prime(np.array([0.2, -1.5]))


def test_kinetic_energy_matches_lorentz_factor() -> None:
    v = np.array([0.0, 0.5, 3.0])
    assert np.allclose(CurvatureOperator.kinetic(v), CurvatureOperator.lorentz_factor(v) - 1.0)


def test_shifted_cosine_weight_decomposition(trig_problem: Problem) -> None:
    report, decomposition = weight_analysis(trig_problem.weight, trig_problem.nonlinearity)
    assert report.integral == pytest.approx(-math.sqrt(2) * math.pi, rel=1e-12)
    assert report.mean_negative
    assert report.positivity_count == 1
    sigma, tau = decomposition.positivity_intervals[0]
    assert sigma == pytest.approx(0.0, abs=1e-12)
    assert tau == pytest.approx(math.pi / 2, rel=1e-12)
    assert decomposition.complement[0] == pytest.approx((math.pi / 2, 2 * math.pi))


def test_step_weight_decomposition(step_problem: Problem) -> None:
    weight = step_problem.weight
    assert weight.integral(0.0, 10.0) == pytest.approx(-12.0)
    decomposition = sign_decomposition(weight)
    assert decomposition.positivity_intervals == ((0.0, 1.0), (2.0, 3.0))
    assert weight.value(1.5) == 0.0
    assert weight.value(12.5) == 1.0
    assert list(weight.forced_mesh(0.0, 10.0)) == [1.0, 2.0, 3.0]


def test_wrapping_positivity_run_is_merged() -> None:
    weight = WeightSpec.piecewise((0.0, 1.0, 3.0, 4.0), (1.0, -1.0, 1.0))
    assert sign_decomposition(weight).positivity_intervals == ((-1.0, 1.0),)


def test_piecewise_weight_needs_matching_values() -> None:
    with pytest.raises(ConfigValidationError):
        WeightSpec.piecewise((0.0, 1.0, 2.0), (1.0,))


def test_extended_force_branches(trig_problem: Problem) -> None:
    assert trig_problem.force(0.0, 5.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert trig_problem.force(1.0, -2.0, 2.0) == 2.0
    t, u = 0.7, 0.3
    expected = 2.0 * trig_problem.weight.value(t) * u**3
    assert trig_problem.force(t, u, 2.0) == pytest.approx(expected)
    assert trig_problem.force(t, 0.0, 2.0) == 0.0


def test_saturated_derivative_matches_difference_quotient() -> None:
    g = NonlinearitySpec.saturated(3.0, 0.5)
    u, h = 1.3, 1e-6
    numeric = (g.value(u + h) - g.value(u - h)) / (2 * h)
    assert g.derivative(u) == pytest.approx(numeric, rel=1e-7)
    second = (g.derivative(u + h) - g.derivative(u - h)) / (2 * h)
    assert g.second_derivative(u) == pytest.approx(second, rel=1e-6)
    assert g.hypotheses().growth_exponent_eta == 0.0


def test_nonlinearity_rejects_small_exponent() -> None:
    with pytest.raises(ConfigValidationError):
        NonlinearitySpec.power(1.0)
    with pytest.raises(ConfigValidationError):
        NonlinearitySpec.saturated(2.0, 1.5)


def test_threshold_constants_satisfy_their_constraints(trig_problem: Problem, step_problem: Problem) -> None:
    for problem in (trig_problem, step_problem):
        decomposition = sign_decomposition(problem.weight)
        constants = threshold_constants(decomposition, problem.nonlinearity)
        assert constants.rho_star > 0
        assert constants.lambda_star_upper > 0
        assert rho_constraints_hold(decomposition, constants.rho_star)
        assert all(value > 0 for value in constants.interval_integrals)
        assert len(constants.g_minima) == decomposition.count


def test_threshold_constants_of_shifted_cosine_weight(trig_problem: Problem) -> None:
    constants = threshold_constants(sign_decomposition(trig_problem.weight), trig_problem.nonlinearity)
    # I⁺ = [0, π/2]: ρ* = (π/8)/2, inner integral over [π/8, 3π/8], g = u³ at 2ρ*²/(π/2) = π/64
    rho = math.pi / 16
    inner = 2 * math.sin(math.pi / 8) - math.sqrt(2) / 2 * (math.pi / 4)
    expected = (2 / math.sqrt(3)) / ((math.pi / 64) ** 3 * inner)
    assert constants.rho_star == pytest.approx(rho, rel=1e-12)
    assert constants.interval_integrals[0] == pytest.approx(inner, rel=1e-10)
    assert constants.lambda_star_upper == pytest.approx(expected, rel=1e-9)
    assert constants.lambda_star_upper == pytest.approx(46486.5, rel=1e-4)


def test_threshold_constants_of_step_weight(step_problem: Problem) -> None:
    constants = threshold_constants(sign_decomposition(step_problem.weight), step_problem.nonlinearity)
    # both I⁺ have length 1: ρ* = 1/8, inner integral 1 − 4ρ*, g = u² at 2ρ*² = 1/32
    assert constants.rho_star == pytest.approx(0.125, rel=1e-12)
    assert constants.interval_integrals == pytest.approx((0.5, 0.5), rel=1e-12)
    assert constants.g_minima == pytest.approx((1 / 1024, 1 / 1024), rel=1e-12)
    assert constants.lambda_star_upper == pytest.approx(4096 / math.sqrt(3), rel=1e-10)


@pytest.mark.parametrize("problem_name", ["trig_problem", "step_problem"])
def test_doubling_the_weight_halves_lambda_star(problem_name: str, request: pytest.FixtureRequest) -> None:
    problem: Problem = request.getfixturevalue(problem_name)
    base = threshold_constants(sign_decomposition(problem.weight), problem.nonlinearity)
    doubled = threshold_constants(sign_decomposition(problem.weight.scaled(2.0)), problem.nonlinearity)
    assert doubled.rho_star == base.rho_star
    assert doubled.lambda_star_upper == pytest.approx(base.lambda_star_upper / 2, rel=1e-12)


def test_threshold_constants_need_positivity() -> None:
    weight = WeightSpec.constant(-1.0)
    with pytest.raises(NoAdmissibleRho):
        threshold_constants(sign_decomposition(weight), NonlinearitySpec.power(2.0))


def test_bound_check_is_vacuous_above_rho(trig_problem: Problem) -> None:
    decomposition = sign_decomposition(trig_problem.weight)
    constants = threshold_constants(decomposition, trig_problem.nonlinearity)
    check = small_orbit_bound_check(2 * constants.rho_star, 2.0, decomposition, trig_problem.nonlinearity, constants)
    assert not check.applicable
    assert check.satisfied


def test_average_map_degree(trig_problem: Problem) -> None:
    diagnostics = average_map_degree(trig_problem.weight, trig_problem.nonlinearity, 2.0, 10.0)
    assert diagnostics.f_minus_d == pytest.approx(10.0)
    assert diagnostics.f_plus_d < 0
    assert diagnostics.degree == -1
    assert diagnostics.values.shape == diagnostics.grid.shape


def test_average_map_degree_undefined_for_zero_mean() -> None:
    weight = WeightSpec.trig(1.0, 0.0, 0.0)
    with pytest.raises(DegreeUndefined):
        average_map_degree(weight, NonlinearitySpec.power(2.0), 1.0, 3.0)
    with pytest.raises(ValueError):
        average_map_degree(weight, NonlinearitySpec.power(2.0), 1.0, 0.0)
