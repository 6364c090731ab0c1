"""Adaptive integration of the planar system x₁′ = φ⁻¹(x₂), x₂′ = −f_λ(t, x₁).

Weight discontinuities are forced step endpoints: every span is cut at the
breakpoints of a piecewise-constant weight and each piece is handed to
``solve_ivp`` separately, so no step ever straddles a jump of a(t).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp

from src.errors import ConfigValidationError, InvariantViolation, StepSizeUnderflow
from src.problem.curvature import CurvatureOperator
from src.problem.model import Problem
from src.problem.weights import SignDecomposition, WeightSpec, sign_decomposition

logger = logging.getLogger(__name__)

LAMBDA_CAP_THRESHOLD = 1.0e3
SUPPORTED_METHODS = ("RK45", "DOP853")


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    lambda_aware_cap: bool = True
    method: str = "DOP853"

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigValidationError("integrator tolerances must be positive", rel_tol=self.rel_tol, abs_tol=self.abs_tol)
        if not self.max_step > 0:
            raise ConfigValidationError("max_step must be positive", max_step=self.max_step)
        if self.method not in SUPPORTED_METHODS:
            raise ConfigValidationError("unsupported integration method", method=self.method)

    def tightened(self, factor: float) -> "IntegratorConfig":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)


@dataclass(frozen=True)
class PlanarState:
    x1: float
    x2: float

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "PlanarState":
        return cls(float(values[0]), float(values[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])

    @property
    def velocity(self) -> float:
        """u′ = φ⁻¹(x₂)."""
        return CurvatureOperator.phi_inverse(self.x2)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps of one integration plus the dense interpolant of each piece."""

    times: np.ndarray
    states: np.ndarray
    pieces: Tuple[OdeSolution, ...]
    piece_bounds: Tuple[Tuple[float, float], ...]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def initial(self) -> PlanarState:
        return PlanarState.from_array(self.states[0])

    @property
    def final(self) -> PlanarState:
        return PlanarState.from_array(self.states[-1])

    @property
    def final_vector(self) -> np.ndarray:
        return self.states[-1].copy()

    @property
    def fundamental_matrix(self) -> Optional[np.ndarray]:
        """Final 2×2 fundamental matrix when the variational flow was co-integrated."""
        if self.states.shape[1] < 6:
            return None
        return self.states[-1, 2:6].reshape(2, 2)

    def __call__(self, t) -> np.ndarray:
        """Dense output; shape (dim,) for scalar t, (dim, n) for an array."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((self.states.shape[1], t_arr.size))
        lows = np.array([min(a, b) for a, b in self.piece_bounds])
        order = np.argsort(lows)
        sorted_lows = lows[order]
        idx = np.clip(np.searchsorted(sorted_lows, t_arr, side="right") - 1, 0, len(order) - 1)
        for slot in np.unique(idx):
            mask = idx == slot
            out[:, mask] = self.pieces[order[slot]](t_arr[mask])
        return out[:, 0] if np.ndim(t) == 0 else out

    def sample(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """n uniform times on [t0, t1) and the planar states there."""
        grid = np.linspace(self.t0, self.t1, n, endpoint=False)
        return grid, self(grid)[:2]


def integrate_field(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    y0: Sequence[float],
    *,
    config: IntegratorConfig,
    mesh: Sequence[float] = (),
    piece_max_step: Optional[Callable[[float, float], float]] = None,
) -> Trajectory:
    """Integrate any smooth-between-breakpoints field, restarting at every mesh point."""
    if t1 == t0:
        raise ValueError("empty integration span")
    cuts = [t0, *mesh, t1]
    times, states, pieces, bounds = [], [], [], []
    y = np.asarray(y0, dtype=float)
    for a, b in zip(cuts[:-1], cuts[1:]):
        max_step = config.max_step if piece_max_step is None else piece_max_step(a, b)
        sol = solve_ivp(
            fun,
            (a, b),
            y,
            method=config.method,
            rtol=config.rel_tol,
            atol=config.abs_tol,
            max_step=max_step,
            dense_output=True,
        )
        if sol.status == -1:
            reached = float(sol.t[-1]) if sol.t.size else a
            raise StepSizeUnderflow(f"adaptive stepping stalled: {sol.message}", time_reached=reached)
        if not np.all(np.isfinite(sol.y)):
            raise InvariantViolation("non-finite state produced", time_reached=float(sol.t[-1]))
        start = 0 if not times else 1
        times.append(sol.t[start:])
        states.append(sol.y[:, start:].T)
        pieces.append(sol.sol)
        bounds.append((a, b))
        y = sol.y[:, -1]
    logger.debug("integrated [%g, %g] in %d pieces, %d steps", t0, t1, len(pieces), sum(len(t) for t in times))
    return Trajectory(np.concatenate(times), np.vstack(states), tuple(pieces), tuple(bounds))


@lru_cache(maxsize=64)
def _cached_decomposition(weight: WeightSpec) -> SignDecomposition:
    return sign_decomposition(weight)


def planar_field(problem: Problem, lam: float, *, with_variational: bool = False):
    """Right-hand side of the planar system, optionally with the 2×2 variational block."""
    weight, g = problem.weight, problem.nonlinearity

    def force(t: float, u: float) -> float:
        if u <= 0.0:
            return -u
        return lam * weight.value(t) * g.value(u)

    def dforce(t: float, u: float) -> float:
        if u < 0.0:
            return -1.0
        return lam * weight.value(t) * g.derivative(u)

    def fun(t, y):
        x1, x2 = y[0], y[1]
        root = math.sqrt(1.0 + x2 * x2)
        dx = [x2 / root, -force(t, x1)]
        if not with_variational:
            return dx
        c = root ** -3
        d = -dforce(t, x1)
        z11, z12, z21, z22 = y[2], y[3], y[4], y[5]
        return dx + [c * z21, c * z22, d * z11, d * z12]

    return fun


def forced_mesh(problem: Problem, lam: float, t0: float, t1: float, config: IntegratorConfig) -> np.ndarray:
    """Weight breakpoints, plus positivity-interval ends when the λ-aware cap is active."""
    mesh = list(problem.weight.forced_mesh(t0, t1))
    if _cap_active(lam, config):
        period = problem.period
        lo, hi = min(t0, t1), max(t0, t1)
        for sigma, tau in _cached_decomposition(problem.weight).positivity_intervals:
            for edge in (sigma, tau):
                k0 = math.floor((lo - edge) / period)
                k1 = math.ceil((hi - edge) / period)
                for k in range(k0, k1 + 1):
                    point = edge + k * period
                    if lo < point < hi:
                        mesh.append(point)
    points = np.unique(np.asarray(mesh, dtype=float))
    if points.size:
        scale = 1e-12 * max(1.0, abs(t0), abs(t1))
        keep = np.concatenate([[True], np.diff(points) > scale])
        points = points[keep]
        points = points[(np.abs(points - t0) > scale) & (np.abs(points - t1) > scale)]
    return points if t1 >= t0 else points[::-1]


def _cap_active(lam: float, config: IntegratorConfig) -> bool:
    return config.lambda_aware_cap and lam > LAMBDA_CAP_THRESHOLD


def _piece_max_step(problem: Problem, lam: float, config: IntegratorConfig):
    if not _cap_active(lam, config):
        return None
    cap = min(config.max_step, problem.period / (50.0 * math.sqrt(lam)))
    decomposition = _cached_decomposition(problem.weight)

    def rule(a: float, b: float) -> float:
        middle = 0.5 * (a + b)
        return cap if bool(decomposition.contains(middle)) else config.max_step

    return rule


def integrate(
    problem: Problem,
    lam: float,
    t0: float,
    t1: float,
    state0,
    config: Optional[IntegratorConfig] = None,
    *,
    with_variational: bool = False,
) -> Trajectory:
    """Flow of the planar system from ``state0`` at ``t0`` to ``t1`` (either direction)."""
    config = config or IntegratorConfig()
    if isinstance(state0, PlanarState):
        y0 = state0.as_array()
    else:
        y0 = np.asarray(state0, dtype=float)[:2]
    if with_variational:
        y0 = np.concatenate([y0, [1.0, 0.0, 0.0, 1.0]])
    return integrate_field(
        planar_field(problem, lam, with_variational=with_variational),
        t0,
        t1,
        y0,
        config=config,
        mesh=forced_mesh(problem, lam, t0, t1, config),
        piece_max_step=_piece_max_step(problem, lam, config),
    )


def hamiltonian(problem: Problem, lam: float, t, x1, x2):
    """√(1 + x₂²) − 1 + ∫₀^{x₁} f_λ(t, s) ds; conserved when a is constant."""
    return CurvatureOperator.kinetic(x2) + problem.potential(t, x1, lam)


def second_derivative_residual(trajectory: Trajectory, problem: Problem, lam: float) -> float:
    """max |u″ + λ a g(u)(1 − u′²)^{3/2}| over step midpoints with u > 0.

    u″ is taken from a fourth-order central difference of u′ = φ⁻¹(x₂) on the
    dense output, kept inside the step so it never crosses a breakpoint.
    """
    times = trajectory.times
    gaps = np.diff(times)
    span = abs(times[-1] - times[0])
    usable = np.abs(gaps) > 1e-6 * span
    if not np.any(usable):
        return 0.0
    mids = 0.5 * (times[:-1] + times[1:])[usable]
    h = np.minimum(1e-3 * span, 0.2 * np.abs(gaps[usable])) * np.sign(gaps[usable])
    mid_states = trajectory(mids)
    positive = mid_states[0] > 0.0
    if not np.any(positive):
        return 0.0
    mids, h, mid_states = mids[positive], h[positive], mid_states[:, positive]

    def velocity(t):
        return CurvatureOperator.phi_inverse(trajectory(t)[1])

    u_second = (
        -velocity(mids + 2 * h) + 8 * velocity(mids + h) - 8 * velocity(mids - h) + velocity(mids - 2 * h)
    ) / (12 * h)
    u, x2 = mid_states[0], mid_states[1]
    squeeze = (1.0 + x2 * x2) ** -1.5
    forcing = lam * problem.weight.value(mids) * problem.nonlinearity.value(u) * squeeze
    return float(np.max(np.abs(u_second + forcing)))
