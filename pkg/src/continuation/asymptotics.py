"""Diagnostics of the small and large branches as λ → +∞."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import BranchLost, NumericalFailure, PreconditionError
from src.problem.curvature import CurvatureOperator
from src.solvers.orbits import PeriodicOrbit, SearchWindow
from src.solvers.search import find_two_solutions
from src.solvers.shooting import PeriodicSolver

logger = logging.getLogger(__name__)

BAND_HALF_WIDTH = 0.05
SUBSTEP_RATIO = 1.5
MAX_HALVINGS = 6
HISTOGRAM_BINS = 40
# flat runs shorter than this share of the period are peaks or troughs, not plateaus
MIN_FLAT_FRACTION = 0.01


@dataclass(frozen=True)
class ProfileSegment:
    t_start: float
    t_end: float
    slope_class: int
    mean_height: float

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


@dataclass
class AsymptoticReport:
    branch: str
    schedule: Tuple[float, ...]
    table: pd.DataFrame
    histograms: Dict[float, np.ndarray] = field(default_factory=dict)
    s_p_estimate: np.ndarray = field(default_factory=lambda: np.empty(0))
    limit_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    limit_profile: np.ndarray = field(default_factory=lambda: np.empty(0))
    limit_slope_class: np.ndarray = field(default_factory=lambda: np.empty(0))
    limit_segments: List[ProfileSegment] = field(default_factory=list)

    def export_frame(self) -> pd.DataFrame:
        columns = ["lambda", "sup_norm", "scaled_norm", "band_fraction_0", "band_fraction_pm1", "w11_distance"]
        return self.table[columns]

    @property
    def period(self) -> float:
        if self.limit_times.size < 2:
            return 0.0
        return float(self.limit_times[-1] + (self.limit_times[1] - self.limit_times[0]))

    def flat_segments(self, min_height: float = 1e-3) -> List[ProfileSegment]:
        min_length = MIN_FLAT_FRACTION * self.period
        return [
            s
            for s in self.limit_segments
            if s.slope_class == 0 and s.mean_height > min_height and s.length >= min_length
        ]

    def plateau_coverage(self, interval: Tuple[float, float], min_height: float = 1e-3) -> float:
        """Fraction of ``interval`` covered by flat segments at positive height."""
        a, b = interval
        covered = sum(max(0.0, min(b, s.t_end) - max(a, s.t_start)) for s in self.flat_segments(min_height))
        return covered / (b - a)

    def summary(self) -> dict:
        return {
            "branch": self.branch,
            "schedule": list(self.schedule),
            "s_p_estimate": [float(v) for v in self.s_p_estimate],
            "curvature_ratio": [float(v) for v in self.table["curvature_ratio"]],
            "limit_segments": [
                {"t_start": s.t_start, "t_end": s.t_end, "slope": s.slope_class, "mean_height": s.mean_height}
                for s in self.limit_segments
            ],
        }


def slope_classes(u_prime: np.ndarray, band: float = BAND_HALF_WIDTH) -> np.ndarray:
    """−1, 0, 1 inside the bands, 2 for transition samples."""
    out = np.full(u_prime.shape, 2, dtype=int)
    out[np.abs(u_prime) <= band] = 0
    out[np.abs(u_prime - 1.0) <= band] = 1
    out[np.abs(u_prime + 1.0) <= band] = -1
    return out


def band_fractions(u_prime: np.ndarray, band: float = BAND_HALF_WIDTH) -> Tuple[float, float]:
    classes = slope_classes(u_prime, band)
    return float(np.mean(classes == 0)), float(np.mean(np.abs(classes) == 1))


def derivative_histogram(u_prime: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(np.clip(u_prime, -1.0, 1.0), bins=HISTOGRAM_BINS, range=(-1.0, 1.0))
    return counts / max(counts.sum(), 1)


def w11_distance(first: PeriodicOrbit, second: PeriodicOrbit) -> float:
    """∫|u₁ − u₂| + ∫|u₁′ − u₂′| over one period on the sample grid."""
    dt = first.period / len(first.times)
    other = second.evaluate(first.times)
    du = np.abs(first.u - other[0])
    dv = np.abs(first.u_prime - CurvatureOperator.phi_inverse(other[1]))
    return float(np.sum(du + dv) * dt)


def profile_segments(times: np.ndarray, u: np.ndarray, classes: np.ndarray, period: float) -> List[ProfileSegment]:
    """Maximal runs of equal slope class; transition samples are dropped."""
    segments = []
    dt = period / len(times)
    start = 0
    for i in range(1, len(classes) + 1):
        if i == len(classes) or classes[i] != classes[start]:
            if classes[start] != 2:
                segments.append(
                    ProfileSegment(float(times[start]), float(times[i - 1] + dt), int(classes[start]), float(np.mean(u[start:i])))
                )
            start = i
    return segments


def _substeps(lam_from: float, lam_to: float) -> np.ndarray:
    count = max(1, math.ceil(math.log(lam_to / lam_from) / math.log(SUBSTEP_RATIO)))
    return np.geomspace(lam_from, lam_to, count + 1)[1:]


def _predict_small(orbit: PeriodicOrbit, lam_new: float, p: float) -> np.ndarray:
    scale = (orbit.lam / lam_new) ** (1.0 / (p - 1.0))
    return np.array([orbit.initial.x1, orbit.initial.x2]) * scale


def _predict_large(history: List[PeriodicOrbit], lam_new: float) -> np.ndarray:
    last = history[-1]
    x = np.array([last.initial.x1, math.asinh(last.initial.x2)])
    if len(history) >= 2:
        prev = history[-2]
        x_prev = np.array([prev.initial.x1, math.asinh(prev.initial.x2)])
        span = math.log(last.lam) - math.log(prev.lam)
        if span > 0:
            x = x + (x - x_prev) * (math.log(lam_new) - math.log(last.lam)) / span
    return np.array([x[0], math.sinh(x[1])])


def _follow(
    solver: PeriodicSolver,
    orbit: PeriodicOrbit,
    lam_target: float,
    kind: str,
    history: List[PeriodicOrbit],
) -> PeriodicOrbit:
    """Warm-started walk from ``orbit.lam`` to ``lam_target`` in geometric substeps."""
    current = orbit
    pending = list(_substeps(current.lam, lam_target))
    halvings = 0
    while pending:
        lam = float(pending[0])
        if kind == "small":
            guess = _predict_small(current, lam, solver.problem.nonlinearity.p)
        else:
            guess = _predict_large(history or [current], lam)
        try:
            candidate = solver.newton_shoot(lam, 1, guess)
            if candidate.is_trivial:
                raise BranchLost("warm start collapsed onto the trivial orbit", lam=lam)
        except NumericalFailure as exc:
            halvings += 1
            if halvings > MAX_HALVINGS:
                raise BranchLost(f"{kind} branch lost: {exc}", lam=lam) from exc
            pending.insert(0, math.sqrt(current.lam * lam))
            logger.debug("%s branch: refining substep towards lam=%g", kind, lam)
            continue
        pending.pop(0)
        current = candidate
        history.append(candidate)
        halvings = 0
    return current


def _pick_start(solver: PeriodicSolver, lam: float, kind: str, window: Optional[SearchWindow], threads: int) -> PeriodicOrbit:
    orbits = find_two_solutions(solver, lam, window, threads=threads)
    if not orbits:
        raise BranchLost("no orbit found at the first schedule value", lam=lam)
    return orbits[0] if kind == "small" else orbits[-1]


def _check_schedule(schedule: Sequence[float]) -> np.ndarray:
    lams = np.asarray(schedule, dtype=float)
    if lams.size < 2 or np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise PreconditionError("schedule must be positive and strictly increasing")
    return lams


def _walk(
    solver: PeriodicSolver,
    lams: np.ndarray,
    kind: str,
    start: Optional[PeriodicOrbit],
    window: Optional[SearchWindow],
    threads: int,
) -> List[PeriodicOrbit]:
    orbit = start if start is not None else _pick_start(solver, float(lams[0]), kind, window, threads)
    if abs(orbit.lam - lams[0]) > 1e-12 * lams[0]:
        orbit = _follow(solver, orbit, float(lams[0]), kind, [orbit])
    history = [orbit]
    selected = [orbit]
    for lam in lams[1:]:
        orbit = _follow(solver, orbit, float(lam), kind, history)
        selected.append(orbit)
        logger.info("%s branch at lam=%g: sup=%.6g", kind, lam, orbit.sup_norm)
    return selected


def _build_report(kind: str, lams: np.ndarray, orbits: List[PeriodicOrbit], solver: PeriodicSolver) -> AsymptoticReport:
    weight, g = solver.problem.weight, solver.problem.nonlinearity
    p = g.p
    rows, histograms = [], {}
    previous: Optional[PeriodicOrbit] = None
    for lam, orbit in zip(lams, orbits):
        slope = orbit.u_prime
        zero, pm1 = band_fractions(slope)
        a = weight.value(orbit.times)
        nonzero = np.abs(a) > 0
        # |u″|/|a| = λ g(u)(1 − u′²)^{3/2} wherever a ≠ 0
        ratio = lam * g.value(orbit.u) * (1.0 + orbit.x2**2) ** -1.5
        rows.append(
            {
                "lambda": float(lam),
                "sup_norm": orbit.sup_norm,
                "scaled_norm": lam ** (1.0 / p) * orbit.sup_norm,
                "curvature_ratio": float(np.max(ratio[nonzero])) if np.any(nonzero) else float("nan"),
                "band_fraction_0": zero,
                "band_fraction_pm1": pm1,
                "w11_distance": w11_distance(orbit, previous) if previous is not None else float("nan"),
            }
        )
        histograms[float(lam)] = derivative_histogram(slope)
        previous = orbit
    table = pd.DataFrame(rows)
    limit = orbits[-1]
    classes = slope_classes(limit.u_prime)
    return AsymptoticReport(
        branch=kind,
        schedule=tuple(float(v) for v in lams),
        table=table,
        histograms=histograms,
        s_p_estimate=np.maximum.accumulate(table["scaled_norm"].to_numpy()),
        limit_times=limit.times,
        limit_profile=limit.u,
        limit_slope_class=classes,
        limit_segments=profile_segments(limit.times, limit.u, classes, limit.period),
    )


def asymptotic_small(
    solver: PeriodicSolver,
    schedule: Sequence[float],
    *,
    start: Optional[PeriodicOrbit] = None,
    window: Optional[SearchWindow] = None,
    threads: int = 1,
) -> AsymptoticReport:
    """Follow the small branch: decay of ‖u_s‖∞, the λ^{1/p} scaling and the curvature ratio."""
    lams = _check_schedule(schedule)
    if lams[-1] / lams[0] < 1e3:
        raise PreconditionError(
            "small-branch schedule must span at least three decades", first=float(lams[0]), last=float(lams[-1])
        )
    orbits = _walk(solver, lams, "small", start, window, threads)
    return _build_report("small", lams, orbits, solver)


def asymptotic_large(
    solver: PeriodicSolver,
    schedule: Sequence[float],
    *,
    start: Optional[PeriodicOrbit] = None,
    window: Optional[SearchWindow] = None,
    threads: int = 1,
) -> AsymptoticReport:
    """Follow the large branch: derivative bands, W^{1,1} trend and the limit profile."""
    lams = _check_schedule(schedule)
    orbits = _walk(solver, lams, "large", start, window, threads)
    return _build_report("large", lams, orbits, solver)
