"""Coefficients of (p(t)w′)′ + (μ + q(t))w = 0 and where they come from."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigValidationError, TrivialOrbit
from src.problem.model import Problem
from src.problem.weights import WeightSpec
from src.solvers.orbits import PeriodicOrbit

logger = logging.getLogger(__name__)

MESH_SAMPLES = 2048

Sampler = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FourierSeries:
    """c₀ + Σₙ (aₙ cos nωt + bₙ sin nωt), ω = 2π/T."""

    period: float
    constant: float = 0.0
    cos: Tuple[float, ...] = ()
    sin: Tuple[float, ...] = ()

    @property
    def order(self) -> int:
        return max(len(self.cos), len(self.sin))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        omega = 2 * math.pi / self.period
        out = np.full(t_arr.shape, self.constant, dtype=float)
        for n, a in enumerate(self.cos, start=1):
            out = out + a * np.cos(n * omega * t_arr)
        for n, b in enumerate(self.sin, start=1):
            out = out + b * np.sin(n * omega * t_arr)
        return float(out) if out.ndim == 0 else out

    def complex_coefficient(self, m: int) -> complex:
        """q̂ₘ with q(t) = Σ q̂ₘ e^{imωt}."""
        if m == 0:
            return complex(self.constant)
        n = abs(m)
        a = self.cos[n - 1] if n <= len(self.cos) else 0.0
        b = self.sin[n - 1] if n <= len(self.sin) else 0.0
        value = complex(a, -b) / 2
        return value if m > 0 else value.conjugate()


@dataclass(frozen=True, eq=False)
class SturmLiouvilleCoeffs:
    """p and q as vectorized samplers on one period, with the forced mesh of q."""

    period: float
    p: Sampler
    q: Sampler
    provenance: str
    breakpoints_from: Optional[WeightSpec] = None
    p_constant: Optional[float] = None
    fourier: Optional[FourierSeries] = None
    p_star: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ConfigValidationError("coefficient period must be positive", period=self.period)
        grid = np.linspace(0.0, self.period, MESH_SAMPLES, endpoint=False)
        p_values = np.broadcast_to(np.asarray(self.p(grid), dtype=float), grid.shape)
        p_star = float(np.min(p_values))
        if not p_star > 0:
            raise ConfigValidationError("p must be bounded away from zero", p_star=p_star, provenance=self.provenance)
        object.__setattr__(self, "p_star", p_star)

    def mesh(self, t0: float, t1: float) -> np.ndarray:
        if self.breakpoints_from is None:
            return np.empty(0)
        return self.breakpoints_from.forced_mesh(t0, t1)

    def p_at(self, t: float) -> float:
        return float(self.p(t))

    def q_at(self, t: float) -> float:
        return float(self.q(t))


def trigonometric_coeffs(
    period: float = 2 * math.pi,
    constant: float = 0.0,
    cos: Sequence[float] = (),
    sin: Sequence[float] = (),
    *,
    p_value: float = 1.0,
) -> SturmLiouvilleCoeffs:
    """Constant p and a trigonometric polynomial q."""
    series = FourierSeries(period, float(constant), tuple(float(v) for v in cos), tuple(float(v) for v in sin))
    return SturmLiouvilleCoeffs(
        period=period,
        p=lambda t: np.full(np.shape(t), p_value, dtype=float) if np.ndim(t) else p_value,
        q=series,
        provenance="analytic",
        p_constant=float(p_value),
        fourier=series,
    )


def constant_coeffs(q_value: float, period: float = 2 * math.pi, *, p_value: float = 1.0) -> SturmLiouvilleCoeffs:
    return trigonometric_coeffs(period, q_value, p_value=p_value)


def linearize_around(orbit: PeriodicOrbit, problem: Problem) -> SturmLiouvilleCoeffs:
    """p = φ′(u′) = (1 + x₂²)^{3/2} and q = λ a(t) g′(u) along the orbit's dense output."""
    g, weight, lam = problem.nonlinearity, problem.weight, orbit.lam
    span = orbit.k * orbit.period
    if orbit.is_trivial:
        slope_at_zero = float(g.derivative(0.0))
        if not math.isfinite(slope_at_zero):
            raise TrivialOrbit("g'(0) is undefined; no linearization at the trivial orbit", variant=g.label)
        if slope_at_zero == 0.0:
            return trigonometric_coeffs(span)
        return SturmLiouvilleCoeffs(
            period=span,
            p=lambda t: np.ones(np.shape(t)) if np.ndim(t) else 1.0,
            q=lambda t: lam * weight.value(t) * slope_at_zero,
            provenance="linearization:trivial",
            breakpoints_from=weight if weight.is_piecewise else None,
            p_constant=1.0,
        )
    if orbit.min_value <= 0:
        raise TrivialOrbit("linearization needs a strictly positive orbit", lam=lam, min_value=orbit.min_value)

    def p(t):
        x2 = orbit.evaluate(t)[1]
        return (1.0 + x2 * x2) ** 1.5

    def q(t):
        u = orbit.evaluate(t)[0]
        return lam * weight.value(t) * g.derivative(u)

    logger.debug("linearized around %s orbit at lam=%g over [0, %g]", orbit.orbit_class.value, lam, span)
    return SturmLiouvilleCoeffs(
        period=span,
        p=p,
        q=q,
        provenance=f"linearization:{orbit.orbit_class.value}:lam={lam:g}",
        breakpoints_from=weight if weight.is_piecewise else None,
    )
