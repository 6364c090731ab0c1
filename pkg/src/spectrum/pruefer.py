"""Prüfer angle and radius of the Sturm–Liouville flow.

With z₁ = w, z₂ = p w′ and (z₁, z₂) = ℓ(cos θ, −sin θ):

    θ′ = sin²θ / p + (μ + q) cos²θ
    (log ℓ)′ = ((μ + q) − 1/p) sin θ cos θ

θ is integrated directly, so it is already the continuous lift. A whole grid
of initial angles is advanced in one vectorized solve.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional, Tuple

import numpy as np

from src.errors import PreconditionError
from src.integration.engine import IntegratorConfig, Trajectory, integrate_field
from src.spectrum.coefficients import SturmLiouvilleCoeffs


@dataclass(frozen=True)
class PrueferResult:
    theta_final: float
    ell_final: float


def pruefer_field(coeffs: SturmLiouvilleCoeffs, mu: float):
    def fun(t, y):
        n = y.size // 2
        theta = y[:n]
        p = coeffs.p_at(t)
        s = mu + coeffs.q_at(t)
        cos, sin = np.cos(theta), np.sin(theta)
        return np.concatenate([sin * sin / p + s * cos * cos, (s - 1.0 / p) * sin * cos])

    return fun


def pruefer_path(
    coeffs: SturmLiouvilleCoeffs,
    mu: float,
    theta0,
    n_periods: float = 1,
    config: Optional[IntegratorConfig] = None,
) -> Trajectory:
    """Dense (θ…, log ℓ…) trajectory for one or many initial angles."""
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    span = n_periods * coeffs.period
    y0 = np.concatenate([theta0, np.zeros_like(theta0)])
    return integrate_field(
        pruefer_field(coeffs, mu),
        0.0,
        span,
        y0,
        config=config or IntegratorConfig(),
        mesh=coeffs.mesh(0.0, span),
    )


def pruefer_endpoints(
    coeffs: SturmLiouvilleCoeffs,
    mu: float,
    theta0,
    n_periods: float = 1,
    config: Optional[IntegratorConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """θ(nT) and log ℓ(nT) for every entry of ``theta0`` (ℓ(0) = 1)."""
    n = np.atleast_1d(theta0).size
    final = pruefer_path(coeffs, mu, theta0, n_periods, config).final_vector
    return final[:n], final[n:]


def pruefer_flow(
    coeffs: SturmLiouvilleCoeffs,
    mu: float,
    theta0: float,
    n_periods: float = 1,
    config: Optional[IntegratorConfig] = None,
) -> PrueferResult:
    theta, log_ell = pruefer_endpoints(coeffs, mu, [theta0], n_periods, config)
    return PrueferResult(float(theta[0]), math.exp(float(log_ell[0])))


def rotation_over(
    coeffs: SturmLiouvilleCoeffs,
    k: int,
    theta0,
    config: Optional[IntegratorConfig] = None,
):
    """θ(kT) − θ₀ of the μ = 0 flow; scalar in, scalar out."""
    if k < 1:
        raise PreconditionError("period multiple must be at least 1", k=k)
    theta0_arr = np.atleast_1d(np.asarray(theta0, dtype=float))
    theta, _ = pruefer_endpoints(coeffs, 0.0, theta0_arr, k, config)
    rotation = theta - theta0_arr
    return float(rotation[0]) if np.ndim(theta0) == 0 else rotation


def zero_angle_crossings(path: Trajectory, index: int = 0) -> np.ndarray:
    """Times at which θ crosses π/2 + ℤπ, i.e. where w = ℓ cos θ vanishes."""
    times = path.times
    shifted = (path.states[:, index] - math.pi / 2) / math.pi
    marks = np.floor(shifted)
    crossings = []
    for i in np.flatnonzero(np.diff(marks) != 0):
        level = max(marks[i], marks[i + 1])
        target = math.pi / 2 + level * math.pi
        lo, hi = times[i], times[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if (path(mid)[index] - target) * (path(lo)[index] - target) > 0:
                lo = mid
            else:
                hi = mid
        crossings.append(0.5 * (lo + hi))
    return np.asarray(crossings)
