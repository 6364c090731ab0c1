"""Threshold constants ρ*, λ*, the a-priori bound check and the degree of the average map."""
from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Tuple

import numpy as np

from src.errors import DegreeUndefined, NoAdmissibleRho
from src.problem.curvature import phi
from src.problem.nonlinearity import NonlinearitySpec
from src.problem.weights import SignDecomposition, WeightSpec

logger = logging.getLogger(__name__)

RHO_RULE = "dyadic-quarter-length-margin-1.1"
RHO_MARGIN = 1.1
RHO_MAX_HALVINGS = 60


@dataclass(frozen=True)
class ThresholdConstants:
    rho_star: float
    lambda_star_upper: float
    interval_integrals: Tuple[float, ...]
    g_minima: Tuple[float, ...]
    rule: str = RHO_RULE

    def as_dict(self) -> dict:
        return {
            "rho_star": self.rho_star,
            "lambda_star_upper": self.lambda_star_upper,
            "interval_integrals": list(self.interval_integrals),
            "g_minima": list(self.g_minima),
            "rho_rule": self.rule,
        }


def rho_constraints_hold(decomp: SignDecomposition, rho: float) -> bool:
    """ρ < |I⁺ᵢ|/4 and ∫_{σᵢ+2ρ}^{τᵢ−2ρ} a > 0 for every i."""
    if decomp.count == 0:
        return False
    for index, length in enumerate(decomp.lengths):
        if not rho < length / 4:
            return False
        if not decomp.inner_integral(index, rho) > 0:
            return False
    return True


def threshold_constants(decomp: SignDecomposition, g: NonlinearitySpec) -> ThresholdConstants:
    """Select ρ* on the dyadic grid (min|I⁺ᵢ|/4)·2⁻ⁿ and evaluate λ*."""
    if decomp.count == 0:
        raise NoAdmissibleRho("weight has no positivity interval")
    base = min(decomp.lengths) / 4
    rho_star = None
    for n in range(1, RHO_MAX_HALVINGS + 1):
        candidate = base * 2.0**-n
        if rho_constraints_hold(decomp, RHO_MARGIN * candidate):
            rho_star = candidate
            break
    if rho_star is None:
        raise NoAdmissibleRho("no dyadic radius satisfies the constraints", base=base, halvings=RHO_MAX_HALVINGS)

    integrals = tuple(decomp.inner_integral(i, rho_star) for i in range(decomp.count))
    minima = tuple(g.minimum_on(2 * rho_star**2 / length, rho_star) for length in decomp.lengths)
    numerator = 2 * phi(0.5)
    lambda_star = max(numerator / (gmin * integral) for gmin, integral in zip(minima, integrals))
    logger.info("threshold constants: rho*=%.6g lambda*=%.6g (%s)", rho_star, lambda_star, RHO_RULE)
    return ThresholdConstants(rho_star, float(lambda_star), integrals, minima)


@dataclass(frozen=True)
class BoundCheck:
    applicable: bool
    height: float
    lhs: Tuple[float, ...]
    rhs: float
    satisfied: bool


def small_orbit_bound_check(
    height: float,
    lam: float,
    decomp: SignDecomposition,
    g: NonlinearitySpec,
    constants: ThresholdConstants,
) -> BoundCheck:
    """λ·min g on [2cρ*/|I⁺ᵢ|, c]·∫_{σᵢ+2ρ*}^{τᵢ−2ρ*} a ≤ 2φ(c/(2ρ*)) for c = max of u on the I⁺ᵢ.

    Only applicable when c ≤ ρ*; otherwise the check is reported as vacuous.
    """
    rho = constants.rho_star
    if not 0 < height <= rho:
        return BoundCheck(False, height, (), float("nan"), True)
    rhs = 2 * phi(height / (2 * rho))
    lhs = tuple(
        lam * g.minimum_on(2 * height * rho / length, height) * integral
        for length, integral in zip(decomp.lengths, constants.interval_integrals)
    )
    slack = 1e-9 * max(1.0, rhs)
    return BoundCheck(True, height, lhs, float(rhs), all(value <= rhs + slack for value in lhs))


@dataclass(frozen=True)
class DegreeDiagnostics:
    grid: np.ndarray
    values: np.ndarray
    f_minus_d: float
    f_plus_d: float
    degree: int


def average_force(s, lam: float, weight: WeightSpec, g: NonlinearitySpec):
    """f#(s) = (1/T)∫₀ᵀ f_λ(t, s) dt, exact on both branches."""
    s_arr = np.asarray(s, dtype=float)
    out = np.where(s_arr <= 0.0, -s_arr, lam * g.value(s_arr) * weight.mean())
    return float(out) if out.ndim == 0 else out


def average_map_degree(
    weight: WeightSpec,
    g: NonlinearitySpec,
    lam: float,
    d: float,
    *,
    samples: int = 201,
) -> DegreeDiagnostics:
    if not (d > 0 and lam > 0):
        raise ValueError("radius and rate must be positive")
    grid = np.linspace(-d, d, samples)
    values = average_force(grid, lam, weight, g)
    f_minus = average_force(-d, lam, weight, g)
    f_plus = average_force(d, lam, weight, g)
    if f_minus == 0.0 or f_plus == 0.0:
        raise DegreeUndefined("average map vanishes at an endpoint", f_minus_d=f_minus, f_plus_d=f_plus, d=d)
    if f_plus < 0 < f_minus:
        degree = -1
    elif f_minus < 0 < f_plus:
        degree = 1
    else:
        degree = 0
    return DegreeDiagnostics(grid, values, f_minus, f_plus, degree)
