"""The planar system recentred on a small periodic orbit, and its angle.

With y = x − x_s the small orbit becomes the equilibrium y ≡ 0:

    y₁′ = φ⁻¹(y₂ + x₂ˢ(t)) − u_s′(t)
    y₂′ = −f_λ(t, y₁ + u_s(t)) + f_λ(t, u_s(t))

Angles are measured clockwise, atan2(−y₂, y₁), the convention in which the
Prüfer angle of the linearized flow increases.
"""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from src.errors import PreconditionError
from src.integration.engine import IntegratorConfig, Trajectory, integrate_field
from src.problem.curvature import CurvatureOperator
from src.problem.model import Problem
from src.solvers.orbits import PeriodicOrbit


class ShiftedSystem:
    def __init__(self, problem: Problem, small: PeriodicOrbit) -> None:
        if small.is_trivial:
            raise PreconditionError("the reference orbit must be nontrivial", lam=small.lam)
        self.problem = problem
        self.small = small
        self.lam = small.lam

    def _force(self, t: float, u: float) -> float:
        if u <= 0.0:
            return -u
        return self.lam * self.problem.weight.value(t) * self.problem.nonlinearity.value(u)

    def field(self, t: float, y) -> list:
        us, xs = self.small.evaluate(t)
        y1, y2 = y[0], y[1]
        dy1 = CurvatureOperator.phi_inverse(y2 + xs) - CurvatureOperator.phi_inverse(xs)
        dy2 = -self._force(t, y1 + us) + self._force(t, us)
        return [float(dy1), float(dy2)]

    def flow(self, y0, span: float, config: Optional[IntegratorConfig] = None, *, t0: float = 0.0) -> Trajectory:
        return integrate_field(
            self.field,
            t0,
            t0 + span,
            np.asarray(y0, dtype=float),
            config=config or IntegratorConfig(),
            mesh=self.problem.weight.forced_mesh(t0, t0 + span),
        )

    def offsets(self, orbit: PeriodicOrbit, times: np.ndarray) -> np.ndarray:
        """y(t) = x(t) − x_s(t) for an orbit of the unshifted system."""
        return orbit.evaluate(times) - self.small.evaluate(times)

    def seed(self, radius: float, angle: float) -> np.ndarray:
        """Original-system state at t = 0 lying at (radius, angle) around x_s(0)."""
        base = np.array([self.small.initial.x1, self.small.initial.x2])
        return base + radius * np.array([math.cos(angle), -math.sin(angle)])


def clockwise_angle(y: np.ndarray) -> np.ndarray:
    """Continuous lift of atan2(−y₂, y₁) along a sampled path."""
    return np.unwrap(np.arctan2(-y[1], y[0]))


def winding_number(y: np.ndarray) -> float:
    """Clockwise turns of a sampled path around the origin."""
    angle = clockwise_angle(y)
    return float((angle[-1] - angle[0]) / (2 * math.pi))


def crossing_monotonicity(system: ShiftedSystem, times: np.ndarray, y: np.ndarray) -> Tuple[bool, int]:
    """At every sign change of y₁ the clockwise angle must be increasing, i.e. y₂·y₁′ > 0."""
    flips = np.flatnonzero(np.sign(y[0, :-1]) * np.sign(y[0, 1:]) < 0)
    ok = True
    for i in flips:
        w = abs(y[0, i]) / (abs(y[0, i]) + abs(y[0, i + 1]))
        t = times[i] + w * (times[i + 1] - times[i])
        state = y[:, i] + w * (y[:, i + 1] - y[:, i])
        dy1 = system.field(t, state)[0]
        if not state[1] * dy1 > 0:
            ok = False
    return ok, int(flips.size)
