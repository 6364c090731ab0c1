"""Newton shooting on the Poincaré map Φᵏ, with optional multiple shooting."""
from __future__ import annotations

from dataclasses import replace
import logging
from typing import List, Optional, Tuple

import numpy as np

from src.errors import InvariantViolation, NoConvergence, NumericalFailure, PreconditionError, SingularJacobian
from src.integration.engine import IntegratorConfig, PlanarState, Trajectory, integrate
from src.problem.model import Problem
from src.problem.thresholds import ThresholdConstants, threshold_constants
from src.problem.weights import sign_decomposition
from src.solvers.orbits import TRIVIAL_NORM, OrbitClass, OrbitPath, PeriodicOrbit, ShootingConfig

logger = logging.getLogger(__name__)

MAX_BACKTRACKS = 10


class PeriodicSolver:
    """Finds kT-periodic solutions as fixed points of the time-kT flow map."""

    def __init__(
        self,
        problem: Problem,
        *,
        integrator: Optional[IntegratorConfig] = None,
        shooting: Optional[ShootingConfig] = None,
        constants: Optional[ThresholdConstants] = None,
    ) -> None:
        self.problem = problem
        self.integrator = integrator or IntegratorConfig()
        self.shooting = shooting or ShootingConfig()
        self._constants = constants

    @property
    def constants(self) -> ThresholdConstants:
        if self._constants is None:
            self._constants = threshold_constants(sign_decomposition(self.problem.weight), self.problem.nonlinearity)
        return self._constants

    def derive(self, *, integrator: Optional[IntegratorConfig] = None, **shooting_changes) -> "PeriodicSolver":
        """Copy sharing the problem and constants, with changed settings."""
        return PeriodicSolver(
            self.problem,
            integrator=integrator or self.integrator,
            shooting=replace(self.shooting, **shooting_changes) if shooting_changes else self.shooting,
            constants=self._constants,
        )

    # flow maps -----------------------------------------------------------------

    def flow(
        self, lam: float, t0: float, t1: float, x, *, with_jacobian: bool = False
    ) -> Tuple[np.ndarray, Optional[np.ndarray], Trajectory]:
        """End state, optional 2×2 Jacobian and trajectory of the flow from t0 to t1."""
        x = np.asarray(x, dtype=float)[:2]
        use_variational = with_jacobian and self.shooting.jacobian == "variational"
        trajectory = integrate(self.problem, lam, t0, t1, x, self.integrator, with_variational=use_variational)
        end = trajectory.final_vector[:2]
        if not with_jacobian:
            return end, None, trajectory
        if use_variational and not _crosses_zero(trajectory):
            return end, trajectory.fundamental_matrix, trajectory
        if use_variational:
            logger.warning("trajectory crosses u = 0 near t=%g; finite-difference Jacobian used", t0)
        return end, self._fd_jacobian(lam, t0, t1, x), trajectory

    def _fd_jacobian(self, lam: float, t0: float, t1: float, x: np.ndarray) -> np.ndarray:
        jac = np.empty((2, 2))
        for j in range(2):
            h = self.shooting.fd_step * max(1.0, abs(x[j]))
            step = np.zeros(2)
            step[j] = h
            plus = integrate(self.problem, lam, t0, t1, x + step, self.integrator).final_vector[:2]
            minus = integrate(self.problem, lam, t0, t1, x - step, self.integrator).final_vector[:2]
            jac[:, j] = (plus - minus) / (2 * h)
        return jac

    def poincare(self, lam: float, k: int, x0, with_jacobian: bool = False) -> Tuple[PlanarState, Optional[np.ndarray]]:
        """Φᵏ(x₀) and, on request, DΦᵏ(x₀)."""
        if k < 1:
            raise PreconditionError("period multiple must be at least 1", k=k)
        end, jac, _ = self.flow(lam, 0.0, k * self.problem.period, x0, with_jacobian=with_jacobian)
        return PlanarState.from_array(end), jac

    # Newton ----------------------------------------------------------------------

    def _nodes_times(self, k: int) -> np.ndarray:
        return np.linspace(0.0, k * self.problem.period, self.shooting.segments + 1)

    def _residuals(self, lam: float, times: np.ndarray, nodes: np.ndarray, with_jacobian: bool):
        n = len(nodes)
        mismatch = np.empty((n, 2))
        jacobians: List[Optional[np.ndarray]] = []
        trajectories: List[Trajectory] = []
        for i in range(n):
            end, jac, traj = self.flow(lam, times[i], times[i + 1], nodes[i], with_jacobian=with_jacobian)
            mismatch[i] = end - nodes[(i + 1) % n]
            jacobians.append(jac)
            trajectories.append(traj)
        return mismatch, jacobians, trajectories

    def newton_shoot(self, lam: float, k: int, guess) -> PeriodicOrbit:
        """Newton iteration on Φᵏ(x) − x (block-cyclic when segments > 1)."""
        if lam <= 0:
            raise PreconditionError("rate must be positive", lam=lam)
        if k < 1:
            raise PreconditionError("period multiple must be at least 1", k=k)
        guess = guess.as_array() if isinstance(guess, PlanarState) else np.asarray(guess, dtype=float)
        if not np.all(np.isfinite(guess)):
            raise PreconditionError("guess must be finite", guess=guess)

        cfg = self.shooting
        times = self._nodes_times(k)
        nodes = self._initial_nodes(lam, times, guess)
        n = len(nodes)
        for iteration in range(cfg.max_newton_iter + 1):
            mismatch, jacobians, trajectories = self._residuals(lam, times, nodes, with_jacobian=True)
            norm = float(np.max(np.abs(mismatch)))
            logger.debug("newton lam=%g k=%d iter=%d residual=%.3e", lam, k, iteration, norm)
            if norm <= cfg.newton_tol:
                return self._build_orbit(lam, k, times, nodes, iteration)
            if iteration == cfg.max_newton_iter:
                break
            matrix = np.zeros((2 * n, 2 * n))
            for i, jac in enumerate(jacobians):
                j = (i + 1) % n
                matrix[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] += jac
                matrix[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] -= np.eye(2)
            condition = float(np.linalg.cond(matrix))
            if not np.isfinite(condition) or condition > cfg.condition_limit:
                raise SingularJacobian(
                    "shooting Jacobian is singular", lam=lam, state=nodes[0], condition=condition
                )
            delta = np.linalg.solve(matrix, -mismatch.ravel()).reshape(n, 2)
            nodes = self._backtrack(lam, times, nodes, delta, norm)
        raise NoConvergence("Newton shooting did not converge", lam=lam, k=k, guess=guess, residual=norm)

    def _initial_nodes(self, lam: float, times: np.ndarray, guess: np.ndarray) -> np.ndarray:
        nodes = [guess[:2]]
        for i in range(len(times) - 2):
            end, _, _ = self.flow(lam, times[i], times[i + 1], nodes[-1])
            nodes.append(end)
        return np.array(nodes)

    def _backtrack(self, lam: float, times: np.ndarray, nodes: np.ndarray, delta: np.ndarray, norm: float) -> np.ndarray:
        alpha = 1.0
        for _ in range(MAX_BACKTRACKS):
            trial = nodes + alpha * delta
            try:
                mismatch, _, _ = self._residuals(lam, times, trial, with_jacobian=False)
            except NumericalFailure:
                alpha *= 0.5
                continue
            if float(np.max(np.abs(mismatch))) < norm:
                return trial
            alpha *= 0.5
        raise NoConvergence("line search failed to reduce the residual", lam=lam, state=nodes[0], residual=norm)

    # orbit assembly ----------------------------------------------------------------

    def classify(self, sup_norm: float) -> Tuple[OrbitClass, bool]:
        if sup_norm < TRIVIAL_NORM:
            return OrbitClass.TRIVIAL, False
        rho = self.constants.rho_star
        margin = self.shooting.near_threshold_margin
        if sup_norm < rho:
            return OrbitClass.SMALL, sup_norm > (1 - margin) * rho
        return OrbitClass.LARGE, sup_norm < (1 + margin) * rho

    def orbit_from_state(self, lam: float, k: int, x0) -> PeriodicOrbit:
        """Assemble an orbit record from an already converged initial state."""
        times = self._nodes_times(k)
        nodes = self._initial_nodes(lam, times, np.asarray(x0, dtype=float))
        return self._build_orbit(lam, k, times, nodes, 0)

    def _build_orbit(self, lam: float, k: int, times: np.ndarray, nodes: np.ndarray, iterations: int) -> PeriodicOrbit:
        mismatch, jacobians, trajectories = self._residuals(lam, times, nodes, with_jacobian=True)
        monodromy = np.eye(2)
        for jac in jacobians:
            monodromy = jac @ monodromy
        path = OrbitPath(tuple(trajectories))
        span = k * self.problem.period
        sample_times = np.linspace(0.0, span, self.shooting.samples, endpoint=False)
        states = path(sample_times)
        u, x2 = states[0], states[1]
        sup_norm = max(float(np.max(u)), path.max_position())
        min_value = min(float(np.min(u)), path.min_position())
        orbit_class, near = self.classify(sup_norm)
        if orbit_class is OrbitClass.TRIVIAL:
            if min_value < -TRIVIAL_NORM:
                raise InvariantViolation("weak maximum principle violated", lam=lam, min_value=min_value)
        elif min_value <= 0.0:
            raise InvariantViolation("strong maximum principle violated", lam=lam, min_value=min_value)
        if near:
            logger.warning(
                "orbit at lam=%g classified %s within %.0f%% of rho*",
                lam,
                orbit_class.value,
                100 * self.shooting.near_threshold_margin,
            )
        multipliers = np.linalg.eigvals(monodromy)
        orbit = PeriodicOrbit(
            lam=float(lam),
            k=int(k),
            period=self.problem.period,
            initial=PlanarState.from_array(nodes[0]),
            times=sample_times,
            u=u,
            x2=x2,
            residual=float(np.max(np.abs(mismatch))),
            sup_norm=sup_norm,
            min_value=min_value,
            orbit_class=orbit_class,
            near_threshold=near,
            multipliers=(complex(multipliers[0]), complex(multipliers[1])),
            monodromy_det=float(np.linalg.det(monodromy)),
            iterations=iterations,
            path=path,
        )
        logger.info(
            "orbit lam=%g k=%d class=%s sup=%.6g residual=%.2e",
            lam,
            k,
            orbit_class.value,
            sup_norm,
            orbit.residual,
        )
        return orbit


def _crosses_zero(trajectory: Trajectory) -> bool:
    positions = trajectory.states[:, 0]
    return bool(np.min(positions) < 0.0 < np.max(positions))


def fixed_point_residual(solver: PeriodicSolver, orbit: PeriodicOrbit, integrator: IntegratorConfig) -> float:
    """|Φᵏ(x₀) − x₀|∞ recomputed segmentwise under a different integrator setting."""
    other = solver.derive(integrator=integrator)
    times = other._nodes_times(orbit.k)
    nodes = np.array([orbit.evaluate(t) for t in times[:-1]])
    mismatch, _, _ = other._residuals(orbit.lam, times, nodes, with_jacobian=False)
    return float(np.max(np.abs(mismatch)))

