"""Ring-seeded Newton search for kT-periodic solutions winding j times around u_s."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import NotFound, NumericalFailure, PreconditionError, TangentialZero
from src.integration.engine import integrate
from src.solvers.orbits import PeriodicOrbit, sup_distance
from src.solvers.shooting import PeriodicSolver
from src.solvers.verification import verify_orbit
from src.subharmonics.shifted import ShiftedSystem, clockwise_angle, winding_number
from src.subharmonics.twist import TwistReport, twist_check

logger = logging.getLogger(__name__)

SEED_BUDGET = 512
RING_RADII = 16
RING_ANGLES = 32
DENSE_SAMPLES = 8192
ZERO_TIME_TOL = 1e-10
INNER_RADIUS_FRACTION = 0.05


@dataclass(frozen=True)
class ZeroCertificate:
    zero_count: int
    zero_times: Tuple[float, ...]
    return_residuals: Dict[int, float]
    minimal_period: bool


@dataclass
class SubharmonicOrbit:
    k: int
    j: int
    lam: float
    solutions: Tuple[PeriodicOrbit, PeriodicOrbit]
    certificates: Tuple[ZeroCertificate, ZeroCertificate]
    windings: Tuple[float, float]
    class_separation: float
    small: PeriodicOrbit = field(repr=False)
    seeds_tried: int = 0

    def frame(self, samples: int = 2048) -> pd.DataFrame:
        span = self.k * self.small.period
        times = np.linspace(0.0, span, samples + 1)
        reference = self.small.evaluate(times)[0]
        frames = []
        for index, orbit in enumerate(self.solutions, start=1):
            u = orbit.evaluate(times)[0]
            frames.append(pd.DataFrame({"solution": index, "t": times, "u": u, "u_minus_us": u - reference}))
        return pd.concat(frames, ignore_index=True)

    def summary(self) -> dict:
        return {
            "k": self.k,
            "j": self.j,
            "lambda": self.lam,
            "zero_count": [c.zero_count for c in self.certificates],
            "class_separation": self.class_separation,
            "residuals": [o.residual for o in self.solutions],
            "windings": list(self.windings),
            "minimal_period": [c.minimal_period for c in self.certificates],
            "return_residuals": [{str(l): r for l, r in c.return_residuals.items()} for c in self.certificates],
            "initial_states": [[o.initial.x1, o.initial.x2] for o in self.solutions],
            "seeds_tried": self.seeds_tried,
        }


def class_separation(first: PeriodicOrbit, second: PeriodicOrbit) -> float:
    """min over l = 0..k−1 of ‖u₁ − u₂(· + lT)‖∞."""
    return min(sup_distance(first, second, shift=l * first.period) for l in range(first.k))


def _bisect_zero(diff, lo: float, hi: float) -> float:
    f_lo = diff(lo)
    while hi - lo > ZERO_TIME_TOL:
        mid = 0.5 * (lo + hi)
        f_mid = diff(mid)
        if f_mid * f_lo > 0:
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def count_zeros_and_class(
    candidate: PeriodicOrbit,
    small: PeriodicOrbit,
    k: int,
    solver: PeriodicSolver,
    *,
    samples: int = DENSE_SAMPLES,
) -> Tuple[int, ZeroCertificate]:
    """Transversal zeros of u − u_s on [0, kT) and the minimal-period certificate."""
    if candidate.k != k:
        raise PreconditionError("candidate period multiple differs from k", k=k, candidate_k=candidate.k)
    if candidate.residual > 100 * solver.shooting.newton_tol:
        raise PreconditionError("candidate is not kT-periodic within tolerance", residual=candidate.residual)
    span = k * small.period
    times = np.linspace(0.0, span, samples, endpoint=False)
    diff_values = candidate.evaluate(times)[0] - small.evaluate(times)[0]
    scale = float(np.max(np.abs(diff_values)))
    if scale < 1e-8:
        raise PreconditionError("candidate coincides with the small orbit", lam=candidate.lam)

    def diff(t: float) -> float:
        return float(candidate.evaluate(t)[0] - small.evaluate(t)[0])

    tol = 1e-9 * max(1.0, scale)
    negative = diff_values < 0
    following = np.roll(np.arange(samples), -1)
    flips = np.flatnonzero(negative != negative[following])
    zeros = []
    for i in flips:
        lo = times[i]
        hi = times[i + 1] if i + 1 < samples else span
        zeros.append(_bisect_zero(diff, lo, hi) % span)
    near = np.flatnonzero(np.abs(diff_values) < tol)
    for i in near:
        before, after = diff_values[i - 1], diff_values[(i + 1) % samples]
        if before * after > 0:
            raise TangentialZero("u - u_s touches zero without changing sign", t=float(times[i]))

    residuals = {}
    x0 = candidate.initial.as_array()
    for l in range(1, k):
        if k % l:
            continue
        end, _ = solver.poincare(candidate.lam, l, x0)
        residuals[l] = float(np.max(np.abs(end.as_array() - x0)))
    minimal = all(r > 100 * solver.shooting.newton_tol for r in residuals.values())
    certificate = ZeroCertificate(len(zeros), tuple(sorted(zeros)), residuals, minimal)
    return certificate.zero_count, certificate


def _ring_radii(system: ShiftedSystem, solver: PeriodicSolver, twist: TwistReport, j: int) -> np.ndarray:
    """Ring radii ordered so those whose trial rotation is closest to j turns come first."""
    inner = INNER_RADIUS_FRACTION * system.small.sup_norm
    radii = np.geomspace(inner, twist.outer_radius, RING_RADII)
    span = twist.k * system.problem.period
    times = np.linspace(0.0, span, DENSE_SAMPLES + 1)
    mismatch = []
    for radius in radii:
        try:
            path = integrate(system.problem, system.lam, 0.0, span, system.seed(radius, 0.0), solver.integrator)
            turns = winding_number(path(times)[:2] - system.small.evaluate(times))
            mismatch.append(abs(turns - j))
        except NumericalFailure:
            mismatch.append(math.inf)
    return radii[np.argsort(mismatch, kind="stable")]


def _accept(
    solver: PeriodicSolver,
    system: ShiftedSystem,
    orbit: Optional[PeriodicOrbit],
    k: int,
    j: int,
) -> Optional[Tuple[PeriodicOrbit, ZeroCertificate, float]]:
    if orbit is None or orbit.is_trivial:
        return None
    if sup_distance(orbit, system.small) <= solver.shooting.delta_dup:
        return None
    try:
        count, certificate = count_zeros_and_class(orbit, system.small, k, solver)
    except (TangentialZero, PreconditionError) as exc:
        logger.debug("candidate at lam=%g rejected: %s", orbit.lam, exc)
        return None
    span = k * system.small.period
    times = np.linspace(0.0, span, DENSE_SAMPLES + 1)
    turns = winding_number(system.offsets(orbit, times))
    if count != 2 * j or abs(turns - j) > 0.25 or not certificate.minimal_period:
        return None
    try:
        verify_orbit(orbit, solver.problem)
    except NumericalFailure as exc:
        logger.debug("candidate with %d zeros failed verification: %s", count, exc)
        return None
    return orbit, certificate, turns


def _shoot(solver: PeriodicSolver, lam: float, k: int, seed: np.ndarray) -> Optional[PeriodicOrbit]:
    try:
        return solver.newton_shoot(lam, k, seed)
    except NumericalFailure as exc:
        logger.debug("subharmonic seed %s failed: %s", seed, exc)
        return None


def find_subharmonic(
    solver: PeriodicSolver,
    small: PeriodicOrbit,
    k: int,
    j: int,
    *,
    twist: Optional[TwistReport] = None,
    budget: int = SEED_BUDGET,
    threads: int = 1,
) -> SubharmonicOrbit:
    """Two kT-periodic solutions with 2j zeros of u − u_s, in distinct periodicity classes."""
    if j < 1 or k < 1 or math.gcd(k, j) != 1:
        raise PreconditionError("need k, j >= 1 with gcd(k, j) = 1", k=k, j=j)
    twist = twist or twist_check(solver, small, k)
    if not twist.verdict or j > twist.m_k:
        raise PreconditionError("twist certificate does not cover (k, j)", k=k, j=j, m_k=twist.m_k, reason=twist.reason)
    lam = small.lam
    system = ShiftedSystem(solver.problem, small)
    angles = np.linspace(0.0, 2 * math.pi, RING_ANGLES, endpoint=False)
    seeds = [(radius, angle) for radius in _ring_radii(system, solver, twist, j) for angle in angles][:budget]

    accepted: List[Tuple[float, float, PeriodicOrbit, ZeroCertificate]] = []
    tried = 0
    for start in range(0, len(seeds), RING_ANGLES):
        batch = [system.seed(r, a) for r, a in seeds[start : start + RING_ANGLES]]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                orbits = list(pool.map(lambda s: _shoot(solver, lam, k, s), batch))
        else:
            orbits = [_shoot(solver, lam, k, s) for s in batch]
        tried += len(batch)
        for orbit in orbits:
            found = _accept(solver, system, orbit, k, j)
            if found is None:
                continue
            orbit, certificate, turns = found
            offset = system.offsets(orbit, np.array([0.0]))
            angle = float(clockwise_angle(offset)[0] % (2 * math.pi))
            accepted.append((round(turns, 6), angle, orbit, certificate))
        accepted.sort(key=lambda item: (item[0], item[1]))
        pair = _distinct_pair(accepted, solver.shooting.delta_dup)
        if pair is not None:
            first, second = pair
            result = SubharmonicOrbit(
                k=k,
                j=j,
                lam=lam,
                solutions=(first[2], second[2]),
                certificates=(first[3], second[3]),
                windings=(first[0], second[0]),
                class_separation=class_separation(first[2], second[2]),
                small=small,
                seeds_tried=tried,
            )
            logger.info(
                "subharmonic (k=%d, j=%d) at lam=%g after %d seeds, class separation %.3g",
                k,
                j,
                lam,
                tried,
                result.class_separation,
            )
            return result
    raise NotFound("seed budget exhausted without two subharmonics", k=k, j=j, lam=lam, seeds=tried, found=len(accepted))


def _distinct_pair(accepted, delta: float):
    for i, first in enumerate(accepted):
        for second in accepted[i + 1 :]:
            if class_separation(first[2], second[2]) > delta:
                return first, second
    return None
