"""Shifted system, twist certificates and the subharmonic search."""
from __future__ import annotations

import math
from typing import List

import numpy as np
import pytest

from src.errors import PreconditionError
from src.solvers.orbits import PeriodicOrbit
from src.solvers.search import find_two_solutions
from src.solvers.shooting import PeriodicSolver
from src.spectrum.coefficients import linearize_around
from src.spectrum.eigen import extreme_rotation
from src.subharmonics.search import class_separation, count_zeros_and_class, find_subharmonic
from src.subharmonics.shifted import ShiftedSystem, clockwise_angle, crossing_monotonicity, winding_number
from src.subharmonics.twist import NON_NEGATIVE_MU0, TwistReport, scan_twist_orders, twist_check


def test_winding_number_counts_clockwise_turns() -> None:
    angle = np.linspace(0.0, 4 * math.pi, 801)
    clockwise = np.vstack([np.cos(angle), -np.sin(angle)])
    assert winding_number(clockwise) == pytest.approx(2.0)
    assert winding_number(clockwise[:, ::-1]) == pytest.approx(-2.0)
    assert clockwise_angle(clockwise)[-1] == pytest.approx(4 * math.pi)


def test_origin_is_an_equilibrium_of_the_shifted_system(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    system = ShiftedSystem(trig_solver.problem, trig_orbits[0])
    for t in (0.0, 1.0, 4.0):
        assert system.field(t, [0.0, 0.0]) == [0.0, 0.0]
    path = system.flow([0.0, 0.0], trig_solver.problem.period)
    assert np.allclose(path.final_vector, 0.0)


def test_shifted_seed_sits_on_the_ring(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    small = trig_orbits[0]
    system = ShiftedSystem(trig_solver.problem, small)
    seed = system.seed(0.2, math.pi / 2)
    assert seed == pytest.approx([small.initial.x1, small.initial.x2 - 0.2])


def test_offset_between_t_periodic_orbits_is_a_closed_loop(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    small, large = trig_orbits[0], trig_orbits[-1]
    system = ShiftedSystem(trig_solver.problem, small)
    times = np.linspace(0.0, small.period, 2049)
    offsets = system.offsets(large, times)
    turns = winding_number(offsets)
    assert turns == pytest.approx(round(turns), abs=1e-6)
    _, flips = crossing_monotonicity(system, times, offsets)
    assert flips % 2 == 0


def test_shifted_system_needs_nontrivial_reference(trig_solver: PeriodicSolver) -> None:
    trivial = trig_solver.orbit_from_state(2.0, 1, [0.0, 0.0])
    with pytest.raises(PreconditionError):
        ShiftedSystem(trig_solver.problem, trivial)
    with pytest.raises(PreconditionError):
        twist_check(trig_solver, trivial, 1)


def test_class_separation_of_an_orbit_with_itself(trig_orbits: List[PeriodicOrbit]) -> None:
    orbit = trig_orbits[-1]
    assert class_separation(orbit, orbit) == pytest.approx(0.0, abs=1e-12)
    assert class_separation(orbit, trig_orbits[0]) > 0


def test_zero_count_rejects_the_reference_orbit(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    small = trig_orbits[0]
    with pytest.raises(PreconditionError):
        count_zeros_and_class(small, small, 1, trig_solver)
    with pytest.raises(PreconditionError):
        count_zeros_and_class(trig_orbits[-1], small, 2, trig_solver)


def test_two_solutions_of_a_t_periodic_problem_cross_an_even_number_of_times(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    count, certificate = count_zeros_and_class(trig_orbits[-1], trig_orbits[0], 1, trig_solver)
    assert count % 2 == 0
    assert certificate.minimal_period
    assert certificate.return_residuals == {}
    assert list(certificate.zero_times) == sorted(certificate.zero_times)


def test_search_rejects_non_coprime_orders(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    with pytest.raises(PreconditionError):
        find_subharmonic(trig_solver, trig_orbits[0], 4, 2)


def test_search_rejects_a_failed_twist(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    failed = TwistReport(3, 2.0, -1.0, float("nan"), 0, 1.0, reason=NON_NEGATIVE_MU0)
    assert failed.admissible_j == []
    assert failed.as_dict()["mu0_negative"] is False
    with pytest.raises(PreconditionError):
        find_subharmonic(trig_solver, trig_orbits[0], 3, 1, twist=failed)


def test_admissible_orders_are_coprime() -> None:
    report = TwistReport(6, 50.0, 1.0, 30.0, 4, 1.0, verdict=True)
    assert report.admissible_j == [1]
    report = TwistReport(5, 50.0, 1.0, 30.0, 4, 1.0, verdict=True)
    assert report.admissible_j == [1, 2, 3, 4]


@pytest.mark.slow
def test_subharmonics_around_the_small_orbit(trig_solver: PeriodicSolver) -> None:
    small = find_two_solutions(trig_solver, 50.0)[0]
    reports = scan_twist_orders(trig_solver, small, 12)
    assert reports[0].gap_at_zero > 0
    twist = reports[-1]
    assert twist.verdict, twist.reason
    assert twist.inner_rotation > 2 * math.pi * twist.m_k
    assert max(twist.outer_rotations) < 2 * math.pi
    result = find_subharmonic(trig_solver, small, twist.k, 1, twist=twist)
    assert [c.zero_count for c in result.certificates] == [2, 2]
    assert all(c.minimal_period for c in result.certificates)
    assert result.class_separation > trig_solver.shooting.delta_dup
    frame = result.frame(256)
    assert set(frame["solution"]) == {1, 2}
    assert result.summary()["k"] == twist.k
    span = twist.k * small.period
    times = np.linspace(0.0, span, 4097)
    system = ShiftedSystem(trig_solver.problem, small)
    for orbit in result.solutions:
        shifted = system.offsets(orbit, times + small.period) - system.offsets(orbit, times)
        assert winding_number(system.offsets(orbit, times)) == pytest.approx(1.0, abs=1e-6)
        assert winding_number(system.offsets(orbit, times + small.period)) == pytest.approx(1.0, abs=1e-6)
        assert np.max(np.abs(shifted)) > 0


def test_lt_shift_keeps_the_winding(trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]) -> None:
    small, large = trig_orbits[0], trig_orbits[-1]
    system = ShiftedSystem(trig_solver.problem, small)
    times = np.linspace(0.0, small.period, 2049)
    base = winding_number(system.offsets(large, times))
    for shift in (1, 3):
        shifted = system.offsets(large, times + shift * small.period)
        assert winding_number(shifted) == pytest.approx(base, abs=1e-9)


def test_rotation_over_doubled_period_is_superadditive(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    coeffs = linearize_around(trig_orbits[0], trig_solver.problem)
    for k in (1, 2):
        single = extreme_rotation(coeffs, 0.0, n_periods=k, grid=64).value
        double = extreme_rotation(coeffs, 0.0, n_periods=2 * k, grid=64).value
        assert double >= 2 * single - 2 * math.pi


def test_large_orbit_past_the_fold_fails_the_twist(
    trig_solver: PeriodicSolver, trig_orbits: List[PeriodicOrbit]
) -> None:
    # mu0 changes sign only at the fold, so the upper branch keeps mu0 > 0 at lam = 2
    report = twist_check(trig_solver, trig_orbits[-1], 1, grid=64)
    assert report.reason == NON_NEGATIVE_MU0
    assert report.gap_at_zero <= 0
    assert not report.verdict
    assert report.admissible_j == []
