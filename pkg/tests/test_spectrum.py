"""Rotation-number eigenvalues and the Galerkin cross-check."""
from __future__ import annotations

import math
from typing import List

import numpy as np
import pytest

from src.errors import ConfigValidationError, InvariantViolation, PreconditionError
from src.integration.engine import IntegratorConfig
from src.problem.model import Problem
from src.solvers.orbits import PeriodicOrbit
from src.solvers.search import find_two_solutions
from src.solvers.shooting import PeriodicSolver
from src.spectrum.coefficients import (
    SturmLiouvilleCoeffs,
    constant_coeffs,
    linearize_around,
    trigonometric_coeffs,
)
from src.spectrum.eigen import extreme_rotation, higher_eigenvalues, principal_eigenvalue, rotation_gap
from src.spectrum.hill import hill_galerkin_spectrum
from src.spectrum.pruefer import pruefer_endpoints, pruefer_path, rotation_over, zero_angle_crossings

TIGHT = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13)


def test_rotation_gap_for_free_operator() -> None:
    coeffs = constant_coeffs(0.0)
    assert rotation_gap(coeffs, 0.0) == pytest.approx(0.0, abs=1e-10)
    assert rotation_gap(coeffs, 1.0) == pytest.approx(2 * math.pi, rel=1e-9)
    assert rotation_gap(coeffs, 1.0, kind="max") == pytest.approx(2 * math.pi, rel=1e-9)


def _random_coeffs(seed: int) -> SturmLiouvilleCoeffs:
    rng = np.random.default_rng(seed)
    return trigonometric_coeffs(
        constant=float(rng.normal()),
        cos=tuple(rng.normal(scale=0.5, size=3)),
        sin=tuple(rng.normal(scale=0.5, size=3)),
        p_value=float(rng.uniform(0.5, 2.0)),
    )


@pytest.mark.parametrize("seed", range(5))
def test_rotation_gap_is_increasing_in_mu(seed: int) -> None:
    coeffs = _random_coeffs(seed)
    values = [rotation_gap(coeffs, mu, grid=64) for mu in np.linspace(-5.0, 5.0, 20)]
    assert all(b > a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("seed", range(8))
def test_angle_derivative_equals_inverse_square_radius(seed: int) -> None:
    coeffs = _random_coeffs(10 + seed)
    theta0, h = float(np.random.default_rng(seed).uniform(0.0, 2 * math.pi)), 1e-6
    theta_plus, _ = pruefer_endpoints(coeffs, 0.3, [theta0 + h], config=TIGHT)
    theta_minus, _ = pruefer_endpoints(coeffs, 0.3, [theta0 - h], config=TIGHT)
    _, log_ell = pruefer_endpoints(coeffs, 0.3, [theta0], config=TIGHT)
    derivative = (theta_plus[0] - theta_minus[0]) / (2 * h)
    assert derivative == pytest.approx(math.exp(-2 * log_ell[0]), rel=1e-4)


def test_zero_crossings_of_cosine() -> None:
    coeffs = constant_coeffs(0.0)
    path = pruefer_path(coeffs, 1.0, 0.0, config=TIGHT)
    crossings = zero_angle_crossings(path)
    assert crossings == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-8)


def test_rotation_over_rejects_zero_periods() -> None:
    with pytest.raises(PreconditionError):
        rotation_over(constant_coeffs(0.0), 0, 0.0)
    assert isinstance(rotation_over(constant_coeffs(1.0), 1, 0.3), float)


@pytest.mark.parametrize("c", [-2.0, 0.0, 3.0])
def test_principal_eigenvalue_of_constant_potential(c: float) -> None:
    result = principal_eigenvalue(constant_coeffs(c), config=TIGHT)
    assert result.mu0 == pytest.approx(-c, abs=1e-8)
    assert result.zeros_of_w == 0
    assert result.periodicity_error < 1e-6
    assert np.max(np.abs(result.eigenfunction)) == pytest.approx(1.0)
    assert list(result.gap_frame().columns) == ["mu", "f_mu"]


def test_sign_changing_principal_eigenfunction_is_rejected(monkeypatch: pytest.MonkeyPatch) -> None:
    def second_mode(coeffs, mu, theta0, *, samples, config):
        times = np.linspace(0.0, coeffs.period, samples, endpoint=False)
        return times, np.cos(times), 0.0, 0.0

    monkeypatch.setattr("src.spectrum.eigen.eigenfunction", second_mode)
    with pytest.raises(InvariantViolation) as excinfo:
        principal_eigenvalue(constant_coeffs(1.0), grid=32)
    assert excinfo.value.context["zeros_of_w"] == 2


def test_free_operator_eigenvalues_coexist() -> None:
    coeffs = constant_coeffs(0.0)
    result = principal_eigenvalue(coeffs, config=TIGHT)
    assert result.mu0 == pytest.approx(0.0, abs=1e-9)
    higher = higher_eigenvalues(coeffs, 2, mu0=result.mu0, config=TIGHT)
    for pair in higher.pairs:
        assert pair.mu_prime == pytest.approx(pair.k**2, abs=1e-6)
        assert pair.mu_double_prime == pytest.approx(pair.k**2, abs=1e-6)
    assert higher.interlaced()
    assert list(higher.frame()["k"]) == [1, 2]


def test_galerkin_oracle_matches_rotation_number() -> None:
    coeffs = trigonometric_coeffs(cos=(1.0,))
    oracle = hill_galerkin_spectrum(coeffs, 64)
    result = principal_eigenvalue(coeffs, config=TIGHT)
    assert result.mu0 == pytest.approx(oracle.mu0, abs=1e-6)
    higher = higher_eigenvalues(coeffs, 1, mu0=result.mu0, config=TIGHT)
    mu_prime, mu_double = oracle.pair(1)
    assert higher.pairs[0].mu_prime == pytest.approx(mu_prime, abs=1e-6)
    assert higher.pairs[0].mu_double_prime == pytest.approx(mu_double, abs=1e-6)
    assert higher.interlaced()


@pytest.mark.parametrize("seed", range(5))
def test_random_trigonometric_potentials(seed: int) -> None:
    coeffs = _random_coeffs(seed)
    oracle = hill_galerkin_spectrum(coeffs, 64)
    result = principal_eigenvalue(coeffs, config=TIGHT)
    assert result.mu0 == pytest.approx(oracle.mu0, abs=1e-6)


def test_galerkin_oracle_needs_trigonometric_data(trig_orbits: List[PeriodicOrbit], trig_problem: Problem) -> None:
    coeffs = linearize_around(trig_orbits[0], trig_problem)
    assert coeffs.fourier is None
    with pytest.raises(PreconditionError):
        hill_galerkin_spectrum(coeffs)


def test_coefficients_reject_degenerate_p() -> None:
    with pytest.raises(ConfigValidationError):
        SturmLiouvilleCoeffs(period=1.0, p=lambda t: np.zeros(np.shape(t)), q=lambda t: 0.0 * t, provenance="test")


def test_linearization_around_trivial_orbit_is_free(trig_solver: PeriodicSolver) -> None:
    trivial = trig_solver.orbit_from_state(2.0, 1, [0.0, 0.0])
    coeffs = linearize_around(trivial, trig_solver.problem)
    assert coeffs.q_at(1.0) == 0.0
    assert principal_eigenvalue(coeffs).mu0 == pytest.approx(0.0, abs=1e-9)


def test_linearization_has_relativistic_p(trig_orbits: List[PeriodicOrbit], trig_problem: Problem) -> None:
    orbit = trig_orbits[-1]
    coeffs = linearize_around(orbit, trig_problem)
    t = 1.0
    x2 = orbit.evaluate(t)[1]
    assert coeffs.p_at(t) == pytest.approx((1.0 + x2 * x2) ** 1.5)
    assert coeffs.p_star >= 1.0 - 1e-12
    assert coeffs.period == pytest.approx(orbit.period)


@pytest.mark.slow
def test_small_orbit_at_large_lambda_has_negative_principal_eigenvalue(trig_solver: PeriodicSolver) -> None:
    small = find_two_solutions(trig_solver, 50.0)[0]
    coeffs = linearize_around(small, trig_solver.problem)
    assert rotation_gap(coeffs, 0.0) > 0
    assert principal_eigenvalue(coeffs).mu0 < 0
    assert extreme_rotation(coeffs, 0.0, n_periods=2).value > 0
