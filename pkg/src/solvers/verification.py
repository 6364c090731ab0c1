"""Necessary identities every positive periodic solution must satisfy."""
from __future__ import annotations

from dataclasses import asdict, dataclass
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from src.errors import PreconditionError, VerificationFailed
from src.integration.engine import second_derivative_residual
from src.problem.curvature import CurvatureOperator
from src.problem.model import Problem
from src.problem.thresholds import BoundCheck, ThresholdConstants, small_orbit_bound_check
from src.problem.weights import sign_decomposition
from src.solvers.orbits import PeriodicOrbit

logger = logging.getLogger(__name__)

ITEM_NAMES = {
    1: "weighted mean of g(u) vanishes",
    2: "mean-value identity",
    3: "strict positivity",
    4: "derivative bound",
    5: "second-derivative residual",
}


@dataclass(frozen=True)
class VerificationRecord:
    weighted_integral: float
    weighted_scale: float
    identity_lhs: float
    identity_rhs: float
    min_value: float
    max_abs_derivative: float
    ode_residual: float
    ode_residual_bound: float
    tolerance: float
    passed: Tuple[bool, bool, bool, bool, bool]
    bound_check: Optional[BoundCheck] = None

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def as_dict(self) -> dict:
        payload = asdict(self)
        payload["passed"] = list(self.passed)
        if self.bound_check is not None:
            payload["bound_check"]["lhs"] = list(self.bound_check.lhs)
        return payload


def _pieces(problem: Problem, span: float, orbit: PeriodicOrbit) -> List[Tuple[float, float]]:
    cuts = {0.0, span}
    cuts.update(float(t) for t in problem.weight.forced_mesh(0.0, span))
    if orbit.path is not None:
        cuts.update(traj.t0 for traj in orbit.path.trajectories)
    ordered = sorted(cuts)
    return list(zip(ordered[:-1], ordered[1:]))


def _integrate(fun, pieces) -> float:
    return float(sum(quad(fun, a, b, limit=200, epsabs=1e-14, epsrel=1e-12)[0] for a, b in pieces))


def verify_orbit(
    orbit: PeriodicOrbit,
    problem: Problem,
    *,
    constants: Optional[ThresholdConstants] = None,
    tolerance: float = 1e-6,
) -> VerificationRecord:
    """Check five necessary conditions in order; raise on the first one violated."""
    if orbit.is_trivial or orbit.min_value <= 0:
        raise PreconditionError("verification needs a strictly positive nontrivial orbit", lam=orbit.lam)
    lam = orbit.lam
    weight, g = problem.weight, problem.nonlinearity
    span = orbit.k * orbit.period
    pieces = _pieces(problem, span, orbit)

    def state(t: float) -> np.ndarray:
        return orbit.evaluate(t)

    def weighted(t: float) -> float:
        return weight.value(t) * g.value(state(t)[0])

    def weighted_abs(t: float) -> float:
        return abs(weight.value(t)) * g.value(state(t)[0])

    def identity_integrand(t: float) -> float:
        u, x2 = state(t)
        slope = CurvatureOperator.phi_inverse(x2)
        # 1/√(1 − u′²) = √(1 + x₂²)
        return (slope / g.value(u)) ** 2 * g.derivative(u) * np.sqrt(1.0 + x2 * x2)

    integral = _integrate(weighted, pieces)
    scale = _integrate(weighted_abs, pieces)
    passed = [abs(integral) <= tolerance * max(scale, 1e-300)]

    lhs = -lam * weight.integral(0.0, span)
    rhs = _integrate(identity_integrand, pieces)
    passed.append(abs(lhs - rhs) <= tolerance * max(abs(lhs), abs(rhs), 1e-300))

    grid = np.linspace(0.0, span, max(4 * len(orbit.times), 4096), endpoint=False)
    dense = orbit.evaluate(grid)
    min_value = float(min(np.min(dense[0]), orbit.min_value))
    max_slope = float(np.max(np.abs(CurvatureOperator.phi_inverse(dense[1]))))
    passed.append(min_value > 0.0)
    passed.append(max_slope < 1.0)

    bound = 1e-6 * lam * weight.sup_norm() * g.value(orbit.sup_norm)
    if orbit.path is not None:
        residual = max(second_derivative_residual(traj, problem, lam) for traj in orbit.path.trajectories)
    else:
        residual = float("nan")
    passed.append(bool(residual <= bound))

    bound_check = None
    if constants is not None:
        decomposition = sign_decomposition(weight)
        mask = decomposition.contains(grid)
        height = float(np.max(dense[0][mask])) if np.any(mask) else 0.0
        bound_check = small_orbit_bound_check(height, lam, decomposition, g, constants)

    record = VerificationRecord(
        weighted_integral=integral,
        weighted_scale=scale,
        identity_lhs=lhs,
        identity_rhs=rhs,
        min_value=min_value,
        max_abs_derivative=max_slope,
        ode_residual=residual,
        ode_residual_bound=bound,
        tolerance=tolerance,
        passed=tuple(bool(flag) for flag in passed),
        bound_check=bound_check,
    )
    for item, flag in enumerate(record.passed, start=1):
        if not flag:
            logger.warning("verification of orbit at lam=%g failed: %s", lam, ITEM_NAMES[item])
            raise VerificationFailed(f"verification failed: {ITEM_NAMES[item]}", item=item, record=record)
    logger.info("orbit at lam=%g verified (|int a g(u)|=%.2e)", lam, abs(integral))
    return record
