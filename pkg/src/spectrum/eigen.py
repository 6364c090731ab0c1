"""Principal and higher periodic eigenvalues from the rotation gap.

f(μ) = min over θ₀ of θ_μ(T; θ₀) − θ₀ is strictly increasing in μ; its zero is
the principal eigenvalue. The max and min gaps reaching 2kπ give the k-th
pair μ′ₖ ≤ μ″ₖ.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar

from src.errors import BracketFailure, InvariantViolation, PreconditionError
from src.integration.engine import IntegratorConfig, Trajectory, integrate_field
from src.spectrum.coefficients import SturmLiouvilleCoeffs
from src.spectrum.pruefer import pruefer_endpoints

logger = logging.getLogger(__name__)

THETA_GRID = 256
ANGLE_TOL = 1e-10
GAP_TOL = 1e-10
MU_CAP = 1e6
EIGENFUNCTION_SAMPLES = 1024


@dataclass(frozen=True)
class GapValue:
    value: float
    theta0: float


def extreme_rotation(
    coeffs: SturmLiouvilleCoeffs,
    mu: float,
    *,
    kind: str = "min",
    n_periods: int = 1,
    grid: int = THETA_GRID,
    config: Optional[IntegratorConfig] = None,
) -> GapValue:
    """Extremum over θ₀ of θ_μ(nT; θ₀) − θ₀: 256-point grid, then golden section on the best cell."""
    if kind not in ("min", "max"):
        raise PreconditionError("gap kind must be 'min' or 'max'", kind=kind)
    sign = 1.0 if kind == "min" else -1.0
    thetas = np.linspace(0.0, 2 * math.pi, grid, endpoint=False)
    final, _ = pruefer_endpoints(coeffs, mu, thetas, n_periods, config)
    values = sign * (final - thetas)
    i = int(np.argmin(values))
    best_value, best_theta = float(values[i]), float(thetas[i])
    h = thetas[1] - thetas[0]

    def objective(theta0: float) -> float:
        theta, _ = pruefer_endpoints(coeffs, mu, [theta0], n_periods, config)
        return sign * (float(theta[0]) - theta0)

    try:
        res = minimize_scalar(
            objective,
            bracket=(best_theta - h, best_theta, best_theta + h),
            method="golden",
            tol=ANGLE_TOL,
        )
    except ValueError:
        # flat neighbourhood: the grid value is already the extremum
        res = None
    if res is not None and res.fun <= best_value:
        best_value, best_theta = float(res.fun), float(res.x)
    return GapValue(sign * best_value, best_theta % (2 * math.pi))


def rotation_gap(
    coeffs: SturmLiouvilleCoeffs,
    mu: float,
    *,
    kind: str = "min",
    grid: int = THETA_GRID,
    config: Optional[IntegratorConfig] = None,
) -> float:
    """min (or max) over θ₀ of θ_μ(T; θ₀) − θ₀."""
    return extreme_rotation(coeffs, mu, kind=kind, grid=grid, config=config).value


@dataclass
class EigenvalueResult:
    mu0: float
    bracket: Tuple[float, float]
    theta0_star: float
    times: np.ndarray = field(repr=False)
    eigenfunction: np.ndarray = field(repr=False)
    residual: float
    periodicity_error: float
    zeros_of_w: int
    gap_samples: List[Tuple[float, float]] = field(default_factory=list, repr=False)

    def report(self) -> dict:
        return {
            "mu0": self.mu0,
            "bracket": list(self.bracket),
            "residual": self.residual,
            "zeros_of_w": self.zeros_of_w,
            "periodicity_error": self.periodicity_error,
            "theta0_star": self.theta0_star,
        }

    def gap_frame(self) -> pd.DataFrame:
        ordered = sorted(self.gap_samples)
        return pd.DataFrame({"mu": [m for m, _ in ordered], "f_mu": [f for _, f in ordered]})


@dataclass(frozen=True)
class EigenPair:
    k: int
    mu_prime: float
    mu_double_prime: float
    zeros_prime: int
    zeros_double_prime: int


@dataclass
class HigherEigenvalues:
    mu0: float
    pairs: List[EigenPair] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": [pair.k for pair in self.pairs],
                "mu_prime": [pair.mu_prime for pair in self.pairs],
                "mu_double_prime": [pair.mu_double_prime for pair in self.pairs],
                "zeros_prime": [pair.zeros_prime for pair in self.pairs],
                "zeros_double_prime": [pair.zeros_double_prime for pair in self.pairs],
            }
        )

    def interlaced(self) -> bool:
        values = [self.mu0]
        for pair in self.pairs:
            values.extend([pair.mu_prime, pair.mu_double_prime])
        strict = all(values[2 * i] < values[2 * i + 1] for i in range(len(self.pairs)))
        # coexistence makes μ′ₖ = μ″ₖ; allow root-finding noise there
        slack = 1e-9 * max(1.0, max(abs(v) for v in values))
        weak = all(values[i] <= values[i + 1] + slack for i in range(len(values) - 1))
        return strict and weak


def _expand(func: Callable[[float], float], lo: float, f_lo: float, step: float) -> Tuple[float, float, float, float]:
    """Walk away from ``lo`` (upwards if f_lo < 0, downwards otherwise) doubling the step."""
    direction = 1.0 if f_lo < 0 else -1.0
    a, f_a = lo, f_lo
    while True:
        b = a + direction * step
        if abs(b) > MU_CAP:
            raise BracketFailure("no sign change of the rotation gap within |mu| <= 1e6", last=a)
        f_b = func(b)
        if f_b * f_lo <= 0:
            return (a, f_a, b, f_b) if direction > 0 else (b, f_b, a, f_a)
        a, f_a = b, f_b
        step *= 2.0


def _root(func: Callable[[float], float], lo: float, f_lo: float, step: float) -> Tuple[float, Tuple[float, float]]:
    if abs(f_lo) <= GAP_TOL:
        return lo, (lo, lo)
    a, f_a, b, f_b = _expand(func, lo, f_lo, step)
    if f_a == 0.0:
        return a, (a, b)
    if f_b == 0.0:
        return b, (a, b)
    mu = brentq(func, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(mu), (a, b)


def _count_sign_changes(w: np.ndarray) -> int:
    signs = np.sign(w[np.abs(w) > 0])
    if signs.size == 0:
        return 0
    return int(np.sum(signs != np.roll(signs, 1)))


def _linear_trajectory(coeffs: SturmLiouvilleCoeffs, mu: float, theta0: float, config: IntegratorConfig) -> Trajectory:
    def fun(t, z):
        return [z[1] / coeffs.p_at(t), -(mu + coeffs.q_at(t)) * z[0]]

    return integrate_field(
        fun,
        0.0,
        coeffs.period,
        [math.cos(theta0), -math.sin(theta0)],
        config=config,
        mesh=coeffs.mesh(0.0, coeffs.period),
    )


def _equation_residual(traj: Trajectory, coeffs: SturmLiouvilleCoeffs, mu: float, scale: float) -> float:
    """max |(p w′)′ + (μ + q) w| at step midpoints relative to max(‖w‖, ‖(μ + q) w‖).

    (p w′)′ is a central difference of z₂ on the dense output.
    """
    times = traj.times
    gaps = np.diff(times)
    span = times[-1] - times[0]
    usable = gaps > 1e-6 * span
    mids = 0.5 * (times[:-1] + times[1:])[usable]
    if mids.size == 0:
        return 0.0
    h = np.minimum(1e-3 * span, 0.2 * gaps[usable])

    def z2(t):
        return traj(t)[1]

    derivative = (-z2(mids + 2 * h) + 8 * z2(mids + h) - 8 * z2(mids - h) + z2(mids - 2 * h)) / (12 * h)
    w = traj(mids)[0]
    forcing = (mu + np.asarray(coeffs.q(mids), dtype=float)) * w
    return float(np.max(np.abs(derivative + forcing)) / max(abs(scale), float(np.max(np.abs(forcing)))))


def eigenfunction(
    coeffs: SturmLiouvilleCoeffs,
    mu: float,
    theta0: float,
    *,
    samples: int = EIGENFUNCTION_SAMPLES,
    config: Optional[IntegratorConfig] = None,
) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """Samples of w normalized to ‖w‖∞ = 1, the equation residual and the periodicity error."""
    config = config or IntegratorConfig()
    traj = _linear_trajectory(coeffs, mu, theta0, config)
    times = np.linspace(0.0, coeffs.period, samples, endpoint=False)
    w = traj(times)[0]
    scale = float(w[np.argmax(np.abs(w))])
    start, end = traj.states[0, :2], traj.states[-1, :2]
    periodicity = float(np.max(np.abs(end - start)) / abs(scale))
    residual = _equation_residual(traj, coeffs, mu, scale)
    return times, w / scale, residual, periodicity


def principal_eigenvalue(
    coeffs: SturmLiouvilleCoeffs,
    *,
    grid: int = THETA_GRID,
    samples: int = EIGENFUNCTION_SAMPLES,
    config: Optional[IntegratorConfig] = None,
) -> EigenvalueResult:
    """μ₀ as the unique zero of the min rotation gap, plus its one-signed eigenfunction."""
    recorded: List[Tuple[float, float]] = []

    def f(mu: float) -> float:
        value = rotation_gap(coeffs, mu, grid=grid, config=config)
        recorded.append((float(mu), value))
        return value

    f0 = f(0.0)
    mu0, bracket = _root(f, 0.0, f0, 1.0)
    gap = extreme_rotation(coeffs, mu0, grid=grid, config=config)
    times, w, residual, periodicity = eigenfunction(coeffs, mu0, gap.theta0, samples=samples, config=config)
    zeros = _count_sign_changes(w)
    if zeros:
        raise InvariantViolation(
            "principal eigenfunction is not one-signed", mu0=mu0, zeros_of_w=zeros, theta0_star=gap.theta0
        )
    logger.info("principal eigenvalue mu0=%.10g (bracket %s, residual %.2e)", mu0, bracket, residual)
    return EigenvalueResult(
        mu0=mu0,
        bracket=bracket,
        theta0_star=gap.theta0,
        times=times,
        eigenfunction=w,
        residual=residual,
        periodicity_error=periodicity,
        zeros_of_w=zeros,
        gap_samples=recorded,
    )


def higher_eigenvalues(
    coeffs: SturmLiouvilleCoeffs,
    k_max: int,
    *,
    mu0: Optional[float] = None,
    grid: int = THETA_GRID,
    config: Optional[IntegratorConfig] = None,
) -> HigherEigenvalues:
    """μ′ₖ, μ″ₖ for k = 1..k_max, walking upwards from μ₀."""
    if k_max < 1:
        raise PreconditionError("k_max must be at least 1", k_max=k_max)
    if mu0 is None:
        mu0 = principal_eigenvalue(coeffs, grid=grid, config=config).mu0
    result = HigherEigenvalues(mu0=mu0)
    lower = mu0
    for k in range(1, k_max + 1):
        target = 2 * k * math.pi

        def upper_gap(mu: float) -> float:
            return extreme_rotation(coeffs, mu, kind="max", grid=grid, config=config).value - target

        def lower_gap(mu: float) -> float:
            return extreme_rotation(coeffs, mu, grid=grid, config=config).value - target

        step = max(1.0, abs(lower))
        mu_prime, _ = _root(upper_gap, lower, upper_gap(lower), step)
        mu_double, _ = _root(lower_gap, mu_prime, lower_gap(mu_prime), 1e-2 * max(1.0, abs(mu_prime)))
        pair = EigenPair(
            k=k,
            mu_prime=mu_prime,
            mu_double_prime=mu_double,
            zeros_prime=_zeros_at(coeffs, mu_prime, "max", grid, config),
            zeros_double_prime=_zeros_at(coeffs, mu_double, "min", grid, config),
        )
        result.pairs.append(pair)
        logger.info("k=%d: mu'=%.10g mu''=%.10g", k, mu_prime, mu_double)
        lower = mu_double
    return result


def _zeros_at(coeffs: SturmLiouvilleCoeffs, mu: float, kind: str, grid: int, config: Optional[IntegratorConfig]) -> int:
    theta0 = extreme_rotation(coeffs, mu, kind=kind, grid=grid, config=config).theta0
    _, w, _, _ = eigenfunction(coeffs, mu, theta0, config=config)
    return _count_sign_changes(w)
