"""Multi-start search for positive T-periodic solutions and scans over λ."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import NumericalFailure, PreconditionError
from src.integration.engine import PlanarState
from src.problem.curvature import CurvatureOperator
from src.problem.weights import SignDecomposition, sign_decomposition
from src.solvers.orbits import OrbitClass, PeriodicOrbit, SearchWindow, sup_distance
from src.solvers.shooting import PeriodicSolver

logger = logging.getLogger(__name__)


def constant_seeds(window: SearchWindow) -> List[PlanarState]:
    """Rest states (h, 0) with h geometrically spaced over the window."""
    if window.n_small == 0:
        return []
    return [PlanarState(float(h), 0.0) for h in np.geomspace(window.r_min, window.r_max, window.n_small)]


def _circular_offset(center: float, t: float, period: float) -> float:
    """Signed offset center − t wrapped to ]−T/2, T/2]."""
    offset = math.fmod(center - t, period)
    if offset > period / 2:
        offset -= period
    elif offset <= -period / 2:
        offset += period
    return offset


def tent_seeds(decomposition: SignDecomposition, window: SearchWindow, rho_star: float) -> List[PlanarState]:
    """States at t = 0 of concave tents peaked on the positivity intervals.

    One profile per interval plus, when there are several, the pointwise
    maximum of all of them; heights lie geometrically in ]ρ*, r_max].
    """
    if window.n_large == 0 or decomposition.count == 0:
        return []
    period = decomposition.weight.period
    centers = [0.5 * (sigma + tau) for sigma, tau in decomposition.positivity_intervals]
    profiles = [[c] for c in centers]
    if len(centers) > 1:
        profiles.append(centers)
    low = max(rho_star, window.r_min)
    if low >= window.r_max:
        return []
    heights = low * (window.r_max / low) ** (np.arange(1, window.n_large + 1) / window.n_large)
    seeds = []
    for profile in profiles:
        for slope in window.slopes:
            for height in heights:
                offsets = [_circular_offset(c, 0.0, period) for c in profile]
                best = min(offsets, key=abs)
                value = height - slope * abs(best)
                derivative = slope * float(np.sign(best))
                x1 = value if value > 0 else min(window.r_min, height)
                seeds.append(PlanarState(float(x1), float(CurvatureOperator.phi(derivative))))
    return seeds


def _shoot(solver: PeriodicSolver, lam: float, seed: PlanarState) -> Optional[PeriodicOrbit]:
    try:
        orbit = solver.newton_shoot(lam, 1, seed)
    except NumericalFailure as exc:
        logger.debug("seed %s at lam=%g failed: %s", seed, lam, exc)
        return None
    return None if orbit.is_trivial else orbit


def deduplicate(orbits: Sequence[PeriodicOrbit], delta: float) -> List[PeriodicOrbit]:
    """Keep one representative per cluster; order by sup norm, then initial x₁."""
    ordered = sorted(orbits, key=lambda o: (o.sup_norm, o.initial.x1))
    kept: List[PeriodicOrbit] = []
    for orbit in ordered:
        if all(sup_distance(orbit, other) > delta for other in kept):
            kept.append(orbit)
    return kept


def find_two_solutions(
    solver: PeriodicSolver,
    lam: float,
    window: Optional[SearchWindow] = None,
    *,
    threads: int = 1,
) -> List[PeriodicOrbit]:
    """All distinct nontrivial T-periodic orbits reached from the seed families."""
    if lam <= 0:
        raise PreconditionError("rate must be positive", lam=lam)
    window = window or SearchWindow()
    decomposition = sign_decomposition(solver.problem.weight)
    seeds = constant_seeds(window) + tent_seeds(decomposition, window, solver.constants.rho_star)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda seed: _shoot(solver, lam, seed), seeds))
    else:
        results = [_shoot(solver, lam, seed) for seed in seeds]
    orbits = deduplicate([orbit for orbit in results if orbit is not None], solver.shooting.delta_dup)
    logger.info(
        "lam=%g: %d seeds, %d distinct orbits (%s)",
        lam,
        len(seeds),
        len(orbits),
        ", ".join(f"{o.orbit_class.value}:{o.sup_norm:.4g}" for o in orbits),
    )
    return orbits


@dataclass(frozen=True)
class ScanResult:
    table: pd.DataFrame
    empty_below: Optional[float]
    two_solution_onset: Optional[float]
    lambda_star_upper: float

    @property
    def bracket(self) -> Optional[Tuple[float, float]]:
        """Grid cell across which the outcome flips to two or more orbits."""
        if self.two_solution_onset is None:
            return None
        lams = self.table["lambda"].to_numpy()
        idx = int(np.searchsorted(lams, self.two_solution_onset))
        lower = float(lams[idx - 1]) if idx > 0 else 0.0
        return lower, self.two_solution_onset

    def as_dict(self) -> dict:
        return {
            "empty_below": self.empty_below,
            "two_solution_onset": self.two_solution_onset,
            "lambda_star_upper": self.lambda_star_upper,
            "bracket": list(self.bracket) if self.bracket else None,
        }


def scan_lambda(
    solver: PeriodicSolver,
    grid: Sequence[float],
    window: Optional[SearchWindow] = None,
    *,
    threads: int = 1,
) -> ScanResult:
    """Run the multi-start search on every grid value; no monotonicity is assumed."""
    lams = np.asarray(grid, dtype=float)
    if lams.size == 0 or np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise PreconditionError("lambda grid must be positive and strictly increasing")
    rows = []
    for lam in lams:
        orbits = find_two_solutions(solver, float(lam), window, threads=threads)
        norms = [o.sup_norm for o in orbits]
        rows.append(
            {
                "lambda": float(lam),
                "n_orbits": len(orbits),
                "n_small": sum(o.orbit_class is OrbitClass.SMALL for o in orbits),
                "n_large": sum(o.orbit_class is OrbitClass.LARGE for o in orbits),
                "min_sup_norm": min(norms) if norms else float("nan"),
                "max_sup_norm": max(norms) if norms else float("nan"),
            }
        )
    table = pd.DataFrame(rows)
    counts = table["n_orbits"].to_numpy()
    multi = np.flatnonzero(counts >= 2)
    onset = float(lams[multi[0]]) if multi.size else None
    limit = multi[0] if multi.size else len(lams)
    empty = np.flatnonzero(counts[:limit] == 0)
    empty_below = float(lams[empty[-1]]) if empty.size else None
    result = ScanResult(table, empty_below, onset, solver.constants.lambda_star_upper)
    logger.info("scan: empty up to %s, two-solution onset %s", empty_below, onset)
    return result
