"""Periodic sign-changing weights a(t) and their sign decomposition."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from src.errors import ConfigValidationError, DecompositionFailure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrigShifted:
    """amplitude·cos(ω(t − phase)) + offset with ω = 2π/T."""

    amplitude: float
    phase: float
    offset: float


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function; ``values[i]`` holds on [breakpoints[i], breakpoints[i+1])."""

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]


WeightForm = Union[TrigShifted, PiecewiseConstant]


@dataclass(frozen=True)
class WeightSpec:
    """T-periodic weight given in closed form, integrated exactly."""

    period: float
    form: WeightForm

    def __post_init__(self) -> None:
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ConfigValidationError("weight period must be positive", period=self.period)
        if isinstance(self.form, TrigShifted):
            if self.form.amplitude < 0:
                raise ConfigValidationError("amplitude must be non-negative", amplitude=self.form.amplitude)
            return
        breaks = np.asarray(self.form.breakpoints, dtype=float)
        if len(self.form.values) != len(breaks) - 1 or len(breaks) < 2:
            raise ConfigValidationError(
                "piecewise weight needs one value per segment",
                breakpoints=len(breaks),
                values=len(self.form.values),
            )
        if np.any(np.diff(breaks) <= 0):
            raise ConfigValidationError("breakpoints must be strictly increasing", breakpoints=self.form.breakpoints)
        if abs(breaks[0]) > 0 or abs(breaks[-1] - self.period) > 1e-12 * self.period:
            raise ConfigValidationError(
                "breakpoints must start at 0 and end at the period",
                breakpoints=self.form.breakpoints,
                period=self.period,
            )

    @classmethod
    def trig(cls, amplitude: float, phase: float, offset: float, period: float = 2 * math.pi) -> "WeightSpec":
        return cls(period=period, form=TrigShifted(amplitude, phase, offset))

    @classmethod
    def piecewise(cls, breakpoints, values, period: Optional[float] = None) -> "WeightSpec":
        breakpoints = tuple(float(b) for b in breakpoints)
        period = breakpoints[-1] if period is None else period
        return cls(period=period, form=PiecewiseConstant(breakpoints, tuple(float(v) for v in values)))

    @classmethod
    def constant(cls, value: float, period: float = 2 * math.pi) -> "WeightSpec":
        return cls.piecewise((0.0, period), (value,), period)

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.period

    @property
    def is_piecewise(self) -> bool:
        return isinstance(self.form, PiecewiseConstant)

    def value(self, t):
        """Evaluate a(t) on the periodic extension; scalar in, scalar out."""
        t_arr = np.asarray(t, dtype=float)
        if isinstance(self.form, TrigShifted):
            out = self.form.amplitude * np.cos(self.omega * (t_arr - self.form.phase)) + self.form.offset
        else:
            breaks = np.asarray(self.form.breakpoints)
            local = np.mod(t_arr, self.period)
            idx = np.clip(np.searchsorted(breaks, local, side="right") - 1, 0, len(self.form.values) - 1)
            out = np.asarray(self.form.values)[idx]
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return self.value(t)

    def integral(self, t0: float, t1: float) -> float:
        """Exact ∫_{t0}^{t1} a(t) dt, signed."""
        return float(self._antiderivative(t1) - self._antiderivative(t0))

    def mean(self) -> float:
        return self.integral(0.0, self.period) / self.period

    def sup_norm(self) -> float:
        if isinstance(self.form, TrigShifted):
            return abs(self.form.amplitude) + abs(self.form.offset)
        return float(np.max(np.abs(self.form.values)))

    def forced_mesh(self, t0: float, t1: float) -> np.ndarray:
        """Breakpoints (shifted by multiples of T) lying strictly between t0 and t1."""
        if not self.is_piecewise:
            return np.empty(0)
        lo, hi = min(t0, t1), max(t0, t1)
        base = np.asarray(self.form.breakpoints[:-1])
        first = math.floor(lo / self.period) - 1
        last = math.ceil(hi / self.period) + 1
        shifts = np.arange(first, last + 1) * self.period
        candidates = (base[None, :] + shifts[:, None]).ravel()
        scale = max(1.0, abs(lo), abs(hi))
        inside = candidates[(candidates > lo + 1e-13 * scale) & (candidates < hi - 1e-13 * scale)]
        inside = np.unique(inside)
        return inside if t1 >= t0 else inside[::-1]

    def scaled(self, factor: float) -> "WeightSpec":
        if isinstance(self.form, TrigShifted):
            form = TrigShifted(self.form.amplitude * factor, self.form.phase, self.form.offset * factor)
            return WeightSpec(self.period, form)
        return WeightSpec(self.period, PiecewiseConstant(self.form.breakpoints, tuple(v * factor for v in self.form.values)))

    def _antiderivative(self, t: float) -> float:
        if isinstance(self.form, TrigShifted):
            w = self.omega
            return self.form.amplitude / w * math.sin(w * (t - self.form.phase)) + self.form.offset * t
        breaks = np.asarray(self.form.breakpoints)
        cumulative = np.concatenate([[0.0], np.cumsum(np.diff(breaks) * np.asarray(self.form.values))])
        turns = math.floor(t / self.period)
        local = t - turns * self.period
        return turns * cumulative[-1] + float(np.interp(local, breaks, cumulative))


@dataclass(frozen=True)
class SignDecomposition:
    """Positivity intervals I⁺ᵢ = [σᵢ, τᵢ] on the circle and their complement.

    An interval wrapping through t = 0 is stored with σᵢ < 0.
    """

    weight: WeightSpec
    positivity_intervals: Tuple[Tuple[float, float], ...]
    complement: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def count(self) -> int:
        return len(self.positivity_intervals)

    @property
    def lengths(self) -> Tuple[float, ...]:
        return tuple(tau - sigma for sigma, tau in self.positivity_intervals)

    def contains(self, t) -> np.ndarray:
        """Mask of times lying in some I⁺ᵢ (periodically)."""
        t_arr = np.mod(np.asarray(t, dtype=float), self.weight.period)
        mask = np.zeros(t_arr.shape, dtype=bool)
        period = self.weight.period
        for sigma, tau in self.positivity_intervals:
            for shift in (-period, 0.0, period):
                mask |= (t_arr >= sigma + shift) & (t_arr <= tau + shift)
        return mask

    def inner_integral(self, index: int, rho: float) -> float:
        """∫_{σᵢ+2ρ}^{τᵢ−2ρ} a."""
        sigma, tau = self.positivity_intervals[index]
        return self.weight.integral(sigma + 2 * rho, tau - 2 * rho)


@dataclass(frozen=True)
class ConditionReport:
    """Weight conditions plus the analytic hypothesis flags of the nonlinearity."""

    mean_negative: bool
    sign_structure: bool
    integral: float
    mean_value: float
    positivity_count: int
    g_star: Optional[bool] = None
    g_zero: Optional[bool] = None
    g_zero_c1: Optional[bool] = None
    g_zero_power: Optional[bool] = None
    g_infinity: Optional[bool] = None
    g_infinity_log: Optional[bool] = None
    g_infinity_growth: Optional[bool] = None
    growth_exponent_eta: Optional[float] = None
    subharmonic_hypotheses: Optional[bool] = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def weight_analysis(weight: WeightSpec, g=None, *, tolerance: float = 1e-12) -> Tuple[ConditionReport, SignDecomposition]:
    """Check the mean-value and sign-structure conditions and split the circle into I⁺ and its complement."""
    decomposition = sign_decomposition(weight)
    total = weight.integral(0.0, weight.period)
    flags = g.hypotheses().as_dict() if g is not None else {}
    report = ConditionReport(
        mean_negative=total < -tolerance * max(1.0, weight.sup_norm() * weight.period),
        sign_structure=decomposition.count >= 1,
        integral=total,
        mean_value=total / weight.period,
        positivity_count=decomposition.count,
        **flags,
    )
    logger.info(
        "weight analysed: integral=%.6g, m=%d, mean-negative=%s",
        total,
        decomposition.count,
        report.mean_negative,
    )
    return report, decomposition


def sign_decomposition(weight: WeightSpec) -> SignDecomposition:
    if isinstance(weight.form, TrigShifted):
        intervals = _trig_intervals(weight)
    else:
        intervals = _piecewise_intervals(weight)
    return SignDecomposition(weight, intervals, _complement(intervals, weight.period))


def _trig_intervals(weight: WeightSpec) -> Tuple[Tuple[float, float], ...]:
    form = weight.form
    if not all(math.isfinite(x) for x in (form.amplitude, form.phase, form.offset)):
        raise DecompositionFailure("non-finite trigonometric weight", form=str(form))
    period = weight.period
    if form.offset >= form.amplitude:
        # a ≥ 0 on the whole circle, or a ≡ 0
        return ((0.0, period),) if form.offset > 0 else ()
    if form.offset <= -form.amplitude:
        return ()
    half_width = math.acos(-form.offset / form.amplitude) / weight.omega
    sigma = math.fmod(form.phase - half_width, period)
    if sigma < 0:
        sigma += period
    if sigma + 2 * half_width > period:
        sigma -= period
    return ((sigma, sigma + 2 * half_width),)


def _piecewise_intervals(weight: WeightSpec) -> Tuple[Tuple[float, float], ...]:
    values = np.asarray(weight.form.values, dtype=float)
    breaks = np.asarray(weight.form.breakpoints, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DecompositionFailure("non-finite piecewise weight", values=weight.form.values)
    runs = []
    start: Optional[int] = None
    for i, v in enumerate(values):
        if v > 0 and start is None:
            start = i
        elif v <= 0 and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(values) - 1))
    if not runs:
        return ()
    if len(runs) == 1 and runs[0] == (0, len(values) - 1):
        return ((0.0, weight.period),)
    intervals = [(float(breaks[a]), float(breaks[b + 1])) for a, b in runs]
    if len(intervals) > 1 and runs[0][0] == 0 and runs[-1][1] == len(values) - 1:
        head = intervals.pop(0)
        tail = intervals.pop()
        intervals.append((tail[0] - weight.period, head[1]))
        intervals.sort()
    return tuple(intervals)


def _complement(intervals, period: float) -> Tuple[Tuple[float, float], ...]:
    if not intervals:
        return ((0.0, period),)
    ordered = sorted(intervals)
    gaps = []
    for (_, tau), (sigma_next, _) in zip(ordered, ordered[1:]):
        if sigma_next > tau:
            gaps.append((tau, sigma_next))
    wrap_start, wrap_end = ordered[-1][1], ordered[0][0] + period
    if wrap_end > wrap_start + 1e-14 * period:
        gaps.append((wrap_start, wrap_end))
    return tuple(gaps)
