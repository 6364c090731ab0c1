"""Periodic orbit records and the knobs of the shooting solver."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import ConfigValidationError
from src.integration.engine import PlanarState, Trajectory
from src.problem.curvature import CurvatureOperator

TRIVIAL_NORM = 1e-8


class OrbitClass(str, Enum):
    TRIVIAL = "Trivial"
    SMALL = "Small"
    LARGE = "Large"


JACOBIAN_MODES = ("variational", "finite-difference")


@dataclass(frozen=True)
class ShootingConfig:
    newton_tol: float = 1e-9
    max_newton_iter: int = 40
    jacobian: str = "variational"
    fd_step: float = 1e-7
    delta_dup: float = 1e-4
    segments: int = 1
    samples: int = 2048
    condition_limit: float = 1e12
    near_threshold_margin: float = 0.05

    def __post_init__(self) -> None:
        if not (self.newton_tol > 0 and self.fd_step > 0 and self.delta_dup > 0):
            raise ConfigValidationError("shooting tolerances must be positive", newton_tol=self.newton_tol)
        if self.jacobian not in JACOBIAN_MODES:
            raise ConfigValidationError("unknown jacobian mode", jacobian=self.jacobian)
        if self.max_newton_iter < 1 or self.segments < 1 or self.samples < 16:
            raise ConfigValidationError(
                "iteration, segment and sample counts out of range",
                max_newton_iter=self.max_newton_iter,
                segments=self.segments,
                samples=self.samples,
            )


@dataclass(frozen=True)
class SearchWindow:
    """Sup-norm window used to place multi-start seeds."""

    r_min: float = 1e-2
    r_max: float = 10.0
    n_small: int = 8
    n_large: int = 6
    slopes: Tuple[float, ...] = (0.25, 0.5, 0.75, 0.95)

    def __post_init__(self) -> None:
        if not 0 < self.r_min < self.r_max:
            raise ConfigValidationError("search window needs 0 < r_min < r_max", r_min=self.r_min, r_max=self.r_max)
        if self.n_small < 0 or self.n_large < 0:
            raise ConfigValidationError("seed counts must be non-negative")
        if any(not 0 < s < 1 for s in self.slopes):
            raise ConfigValidationError("tent slopes must lie in ]0, 1[", slopes=self.slopes)


@dataclass(frozen=True, eq=False)
class OrbitPath:
    """Dense representation of an orbit stitched from its shooting segments."""

    trajectories: Tuple[Trajectory, ...]

    @property
    def t0(self) -> float:
        return self.trajectories[0].t0

    @property
    def t1(self) -> float:
        return self.trajectories[-1].t1

    def __call__(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.array([traj.t0 for traj in self.trajectories])
        idx = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, len(starts) - 1)
        out = np.empty((2, t_arr.size))
        for slot in np.unique(idx):
            mask = idx == slot
            out[:, mask] = self.trajectories[slot](t_arr[mask])[:2]
        return out[:, 0] if np.ndim(t) == 0 else out

    def max_position(self) -> float:
        return float(max(np.max(traj.states[:, 0]) for traj in self.trajectories))

    def min_position(self) -> float:
        return float(min(np.min(traj.states[:, 0]) for traj in self.trajectories))


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    lam: float
    k: int
    period: float
    initial: PlanarState
    times: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    x2: np.ndarray = field(repr=False)
    residual: float
    sup_norm: float
    min_value: float
    orbit_class: OrbitClass
    near_threshold: bool = False
    multipliers: Tuple[complex, complex] = (1.0 + 0j, 1.0 + 0j)
    monodromy_det: float = 1.0
    iterations: int = 0
    path: Optional[OrbitPath] = field(default=None, repr=False, compare=False)

    @property
    def u_prime(self) -> np.ndarray:
        return CurvatureOperator.phi_inverse(self.x2)

    @property
    def is_trivial(self) -> bool:
        return self.orbit_class is OrbitClass.TRIVIAL

    def evaluate(self, t) -> np.ndarray:
        """(x₁, x₂) at arbitrary times; falls back to periodic interpolation of the samples."""
        if self.path is not None:
            return self.path(np.mod(t, self.k * self.period))
        span = self.k * self.period
        local = np.mod(np.asarray(t, dtype=float), span)
        grid = np.append(self.times, span)
        return np.vstack(
            [
                np.interp(local, grid, np.append(self.u, self.u[0])),
                np.interp(local, grid, np.append(self.x2, self.x2[0])),
            ]
        )

    def samples_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "u": self.u, "u_prime": self.u_prime, "x2": self.x2})

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "k": self.k,
            "class": self.orbit_class.value,
            "x1_0": self.initial.x1,
            "x2_0": self.initial.x2,
            "sup_norm": self.sup_norm,
            "min_value": self.min_value,
            "residual": self.residual,
            "near_threshold": self.near_threshold,
            "floquet_multipliers": [[float(np.real(m)), float(np.imag(m))] for m in self.multipliers],
            "monodromy_det": self.monodromy_det,
            "newton_iterations": self.iterations,
        }


def sup_distance(first: PeriodicOrbit, second: PeriodicOrbit, *, samples: int = 512, shift: float = 0.0) -> float:
    """‖u₁ − u₂(· + shift)‖∞ on a common uniform grid over [0, kT)."""
    span = first.k * first.period
    grid = np.linspace(0.0, span, samples, endpoint=False)
    return float(np.max(np.abs(first.evaluate(grid)[0] - second.evaluate(grid + shift)[0])))
