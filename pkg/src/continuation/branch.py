"""Pseudo-arclength continuation of T-periodic orbits in λ."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import ConfigValidationError, CorrectorDivergence, NumericalFailure
from src.solvers.orbits import OrbitClass, PeriodicOrbit
from src.solvers.shooting import PeriodicSolver

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepControl:
    initial_step: float = 0.1
    min_step: float = 1e-6
    max_step: float = 1.0
    max_steps: int = 400
    corrector_iter: int = 12
    fold_rel_tol: float = 1e-6
    reverify_every: int = 10
    trivial_points: int = 50

    def __post_init__(self) -> None:
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ConfigValidationError(
                "step sizes need 0 < min_step <= initial_step <= max_step",
                min_step=self.min_step,
                initial_step=self.initial_step,
                max_step=self.max_step,
            )
        if self.max_steps < 1 or self.corrector_iter < 1:
            raise ConfigValidationError("step counts must be positive")


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    x1: float
    x2: float
    sup_norm: float
    orbit_class: OrbitClass
    fold_flag: bool = False


@dataclass(frozen=True)
class FoldPoint:
    lam: float
    x1: float
    x2: float


@dataclass
class Branch:
    points: List[BranchPoint] = field(default_factory=list)
    folds: List[FoldPoint] = field(default_factory=list)
    step_history: List[float] = field(default_factory=list)
    reverified: List[Tuple[int, bool]] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "lambda": [p.lam for p in self.points],
                "x1_0": [p.x1 for p in self.points],
                "x2_0": [p.x2 for p in self.points],
                "sup_norm": [p.sup_norm for p in self.points],
                "class": [p.orbit_class.value for p in self.points],
                "fold_flag": [p.fold_flag for p in self.points],
            }
        )

    def summary(self) -> dict:
        return {
            "points": len(self.points),
            "folds": [{"lambda": f.lam, "x1_0": f.x1, "x2_0": f.x2} for f in self.folds],
            "lambda_min": min((p.lam for p in self.points), default=None),
            "lambda_max": max((p.lam for p in self.points), default=None),
            "reverified": [[i, ok] for i, ok in self.reverified],
        }


class _ExtendedSystem:
    """F(x, λ) = Φ(x; λ) − x together with its 2×3 Jacobian."""

    def __init__(self, solver: PeriodicSolver) -> None:
        self.solver = solver
        self.period = solver.problem.period

    def jacobian(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        lam = z[2]
        end, jac, _ = self.solver.flow(lam, 0.0, self.period, z[:2], with_jacobian=True)
        h = 1e-6 * max(1.0, abs(lam))
        plus, _, _ = self.solver.flow(lam + h, 0.0, self.period, z[:2])
        minus, _, _ = self.solver.flow(lam - h, 0.0, self.period, z[:2])
        matrix = np.hstack([jac - np.eye(2), ((plus - minus) / (2 * h))[:, None]])
        return end - z[:2], matrix

    def sup_norm(self, z: np.ndarray) -> float:
        _, _, traj = self.solver.flow(z[2], 0.0, self.period, z[:2])
        grid = np.linspace(0.0, self.period, 512, endpoint=False)
        return float(max(np.max(traj(grid)[0]), np.max(traj.states[:, 0])))


def _tangent(matrix: np.ndarray, previous: Optional[np.ndarray], direction: float) -> np.ndarray:
    _, _, vh = np.linalg.svd(matrix)
    tangent = vh[-1]
    if previous is not None:
        if float(tangent @ previous) < 0:
            tangent = -tangent
    elif tangent[2] * direction < 0:
        tangent = -tangent
    return tangent / np.linalg.norm(tangent)


def _correct(system: _ExtendedSystem, predicted: np.ndarray, tangent: np.ndarray, tol: float, max_iter: int):
    """Newton on (F(z), t·(z − z_pred)) = 0; returns the point, its Jacobian and the iteration count."""
    z = predicted.copy()
    for iteration in range(1, max_iter + 1):
        if z[2] <= 0:
            raise CorrectorDivergence("corrector left the positive rate axis", lam=float(z[2]))
        value, matrix = system.jacobian(z)
        arc = float(tangent @ (z - predicted))
        if np.max(np.abs(value)) <= tol and abs(arc) <= tol:
            return z, matrix, iteration
        full = np.vstack([matrix, tangent])
        rhs = -np.concatenate([value, [arc]])
        z = z + np.linalg.solve(full, rhs)
    raise CorrectorDivergence("pseudo-arclength corrector did not converge", lam=float(z[2]))


def _refine_fold(
    system: _ExtendedSystem,
    z_prev: np.ndarray,
    t_prev: np.ndarray,
    step: float,
    control: StepControl,
    tol: float,
) -> FoldPoint:
    """Bisect the arclength until the λ-component of the tangent vanishes."""
    lo, hi = 0.0, step
    best = z_prev
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        z, matrix, _ = _correct(system, z_prev + mid * t_prev, t_prev, tol, control.corrector_iter)
        tangent = _tangent(matrix, t_prev, 1.0)
        best = z
        if tangent[2] * t_prev[2] > 0:
            lo = mid
        else:
            hi = mid
        # λ near a fold is quadratic in arclength
        if (hi - lo) ** 2 <= control.fold_rel_tol * abs(z[2]):
            break
    return FoldPoint(float(best[2]), float(best[0]), float(best[1]))


def _trivial_branch(lam_range: Tuple[float, float], control: StepControl) -> Branch:
    branch = Branch()
    for lam in np.linspace(lam_range[0], lam_range[1], control.trivial_points):
        branch.points.append(BranchPoint(float(lam), 0.0, 0.0, 0.0, OrbitClass.TRIVIAL))
    return branch


def trace_branch(
    solver: PeriodicSolver,
    start: PeriodicOrbit,
    lam_range: Tuple[float, float],
    control: Optional[StepControl] = None,
    *,
    direction: float = -1.0,
) -> Branch:
    """Follow the T-periodic family through ``start`` until it leaves ``lam_range``.

    ``direction`` fixes the initial sign of dλ/ds; folds are the points where
    that sign changes.
    """
    control = control or StepControl()
    lo_lam, hi_lam = lam_range
    if not 0 < lo_lam < hi_lam:
        raise ConfigValidationError("lambda range must satisfy 0 < min < max", lam_range=lam_range)
    if start.is_trivial:
        return _trivial_branch(lam_range, control)

    system = _ExtendedSystem(solver)
    tol = solver.shooting.newton_tol
    z = np.array([start.initial.x1, start.initial.x2, start.lam])
    _, matrix = system.jacobian(z)
    tangent = _tangent(matrix, None, direction)
    branch = Branch()
    branch.points.append(_point(solver, system, z))
    step = control.initial_step

    for index in range(1, control.max_steps + 1):
        while True:
            try:
                z_new, matrix, iterations = _correct(system, z + step * tangent, tangent, tol, control.corrector_iter)
                break
            except (CorrectorDivergence, NumericalFailure, np.linalg.LinAlgError) as exc:
                step *= 0.5
                logger.debug("corrector failed at lam=%g (%s); step -> %g", z[2], exc, step)
                if step < control.min_step:
                    raise CorrectorDivergence(
                        "continuation step underflow",
                        lam=float(z[2]),
                        last_good=[float(v) for v in z],
                    ) from exc
        new_tangent = _tangent(matrix, tangent, direction)
        if new_tangent[2] * tangent[2] < 0:
            try:
                fold = _refine_fold(system, z, tangent, step, control, tol)
            except (CorrectorDivergence, NumericalFailure) as exc:
                logger.warning("fold refinement failed (%s); using the bracketing point", exc)
                fold = FoldPoint(float(z_new[2]), float(z_new[0]), float(z_new[1]))
            branch.folds.append(fold)
            if branch.points:
                last = branch.points[-1]
                branch.points[-1] = BranchPoint(last.lam, last.x1, last.x2, last.sup_norm, last.orbit_class, True)
            logger.info("fold located at lam=%.8g", fold.lam)
        branch.step_history.append(step)
        if not lo_lam <= z_new[2] <= hi_lam:
            edge = _boundary_point(solver, system, z, z_new, lo_lam if z_new[2] < lo_lam else hi_lam)
            if edge is not None:
                branch.points.append(edge)
            break
        z, tangent = z_new, new_tangent
        branch.points.append(_point(solver, system, z))
        if index % control.reverify_every == 0:
            branch.reverified.append((len(branch.points) - 1, _reverify(solver, z)))
        if iterations <= 3:
            step = min(step * 1.5, control.max_step)
        elif iterations > 6:
            step = max(step * 0.5, control.min_step)
    logger.info("branch traced: %d points, %d folds", len(branch.points), len(branch.folds))
    return branch


def _point(solver: PeriodicSolver, system: _ExtendedSystem, z: np.ndarray) -> BranchPoint:
    sup_norm = system.sup_norm(z)
    orbit_class, _ = solver.classify(sup_norm)
    return BranchPoint(float(z[2]), float(z[0]), float(z[1]), sup_norm, orbit_class)


def _boundary_point(
    solver: PeriodicSolver, system: _ExtendedSystem, z_in, z_out, lam_edge: float
) -> Optional[BranchPoint]:
    """Natural-parameter solve at the range edge, seeded by linear interpolation.

    None when the solve fails; the branch then ends at its last converged point.
    """
    weight = (lam_edge - z_in[2]) / (z_out[2] - z_in[2])
    guess = z_in[:2] + weight * (z_out[:2] - z_in[:2])
    try:
        orbit = solver.newton_shoot(lam_edge, 1, guess)
        z = np.array([orbit.initial.x1, orbit.initial.x2, lam_edge])
    except NumericalFailure as exc:
        logger.warning("no converged orbit at the range edge lam=%g (%s); branch ends at lam=%g", lam_edge, exc, z_in[2])
        return None
    return _point(solver, system, z)


def _reverify(solver: PeriodicSolver, z: np.ndarray) -> bool:
    try:
        orbit = solver.newton_shoot(float(z[2]), 1, z[:2])
    except NumericalFailure as exc:
        logger.warning("branch point at lam=%g failed re-verification: %s", z[2], exc)
        return False
    ok = math.hypot(orbit.initial.x1 - z[0], orbit.initial.x2 - z[1]) <= 1e-6 * max(1.0, abs(z[0]))
    if not ok:
        logger.warning("branch point at lam=%g re-converged elsewhere", z[2])
    return ok
