"""Numerical twist certificate around a small T-periodic orbit.

Inner side: the linearized flow rotates by more than 2π·m_k over kT, for
every initial angle. Outer side: solutions of the recentred system started on
the circle of radius kT(1 + margin) rotate by less than one turn.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from src.errors import PreconditionError
from src.integration.engine import IntegratorConfig
from src.solvers.orbits import PeriodicOrbit
from src.solvers.shooting import PeriodicSolver
from src.spectrum.coefficients import linearize_around
from src.spectrum.eigen import THETA_GRID, extreme_rotation, rotation_gap
from src.subharmonics.shifted import ShiftedSystem, clockwise_angle

logger = logging.getLogger(__name__)

OUTER_MARGIN = 0.1
OUTER_ANGLES = 16
OUTER_SAMPLES = 4096

NON_NEGATIVE_MU0 = "NonNegativePrincipalEigenvalue"
NO_INNER_TWIST = "InnerRotationBelowOneTurn"
OUTER_TOO_FAST = "OuterRotationAtLeastOneTurn"


@dataclass
class TwistReport:
    k: int
    lam: float
    gap_at_zero: float
    inner_rotation: float
    m_k: int
    outer_radius: float
    outer_rotations: Tuple[float, ...] = ()
    verdict: bool = False
    reason: Optional[str] = None
    inner_label: str = "linearized"
    inner_theta0: float = field(default=float("nan"))

    @property
    def admissible_j(self) -> List[int]:
        if not self.verdict:
            return []
        return [j for j in range(1, self.m_k + 1) if math.gcd(self.k, j) == 1]

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "lambda": self.lam,
            "gap_at_zero": self.gap_at_zero,
            "mu0_negative": self.gap_at_zero > 0,
            "inner_rotation": self.inner_rotation,
            "inner_label": self.inner_label,
            "m_k": self.m_k,
            "outer_radius": self.outer_radius,
            "outer_rotations": list(self.outer_rotations),
            "verdict": self.verdict,
            "reason": self.reason,
            "admissible_j": self.admissible_j,
        }


def outer_rotations(
    system: ShiftedSystem,
    radius: float,
    span: float,
    config: Optional[IntegratorConfig] = None,
    *,
    angles: int = OUTER_ANGLES,
) -> Tuple[float, ...]:
    """Clockwise rotation over [0, span] from ``angles`` points on the circle of ``radius``."""
    times = np.linspace(0.0, span, OUTER_SAMPLES + 1)
    rotations = []
    for angle in np.linspace(0.0, 2 * math.pi, angles, endpoint=False):
        y0 = radius * np.array([math.cos(angle), -math.sin(angle)])
        path = system.flow(y0, span, config)
        lifted = clockwise_angle(path(times))
        rotations.append(float(lifted[-1] - lifted[0]))
    return tuple(rotations)


def twist_check(
    solver: PeriodicSolver,
    small: PeriodicOrbit,
    k: int,
    *,
    grid: int = THETA_GRID,
    config: Optional[IntegratorConfig] = None,
) -> TwistReport:
    """Inner/outer rotation bounds over kT and the resulting verdict.

    μ₀ < 0 for the linearization is read off the rotation gap: f(0) > 0.
    """
    if k < 1:
        raise PreconditionError("period multiple must be at least 1", k=k)
    if small.is_trivial or small.min_value <= 0:
        raise PreconditionError("twist check needs a positive nontrivial orbit", lam=small.lam)
    problem = solver.problem
    config = config or solver.integrator
    span = k * problem.period
    radius = span * (1.0 + OUTER_MARGIN)
    coeffs = linearize_around(small, problem)
    eta = rotation_gap(coeffs, 0.0, grid=grid, config=config)
    if eta <= 0:
        logger.info("lam=%g: f(0)=%.3g, principal eigenvalue is not negative", small.lam, eta)
        return TwistReport(k, small.lam, eta, float("nan"), 0, radius, reason=NON_NEGATIVE_MU0)

    inner = extreme_rotation(coeffs, 0.0, n_periods=k, grid=grid, config=config)
    m_k = max(0, math.ceil(inner.value / (2 * math.pi)) - 1)
    report = TwistReport(k, small.lam, eta, inner.value, m_k, radius, inner_theta0=inner.theta0)
    if m_k < 1:
        report.reason = NO_INNER_TWIST
        logger.info("k=%d: inner rotation %.4f below one turn", k, inner.value)
        return report

    report.outer_rotations = outer_rotations(ShiftedSystem(problem, small), radius, span, config)
    if max(report.outer_rotations) >= 2 * math.pi:
        report.reason = OUTER_TOO_FAST
    else:
        report.verdict = True
    logger.info(
        "twist k=%d lam=%g: inner %.4f (m_k=%d), outer max %.4f, verdict %s",
        k,
        small.lam,
        inner.value,
        m_k,
        max(report.outer_rotations),
        report.verdict,
    )
    return report


def scan_twist_orders(
    solver: PeriodicSolver,
    small: PeriodicOrbit,
    k_max: int,
    *,
    config: Optional[IntegratorConfig] = None,
) -> List[TwistReport]:
    """Twist reports for k = 1, 2, … up to the first certified order (or k_max)."""
    reports = []
    for k in range(1, k_max + 1):
        report = twist_check(solver, small, k, config=config)
        reports.append(report)
        if report.verdict or report.reason == NON_NEGATIVE_MU0:
            break
    return reports
