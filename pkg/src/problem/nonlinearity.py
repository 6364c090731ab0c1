"""Model nonlinearities g(u) = uᵖ and g(u) = uᵖ/(1 + u^(p−q))."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from src.errors import ConfigValidationError


@dataclass(frozen=True)
class PowerLaw:
    p: float


@dataclass(frozen=True)
class SaturatedPower:
    p: float
    q: float


@dataclass(frozen=True)
class HypothesisFlags:
    """Analytic hypothesis flags; resolved per variant, never estimated numerically."""

    g_star: bool
    g_zero: bool
    g_zero_c1: bool
    g_zero_power: bool
    g_infinity: bool
    g_infinity_log: bool
    g_infinity_growth: bool
    growth_exponent_eta: float
    subharmonic_hypotheses: bool

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NonlinearitySpec:
    variant: Union[PowerLaw, SaturatedPower]

    def __post_init__(self) -> None:
        p = self.variant.p
        if not p > 1:
            raise ConfigValidationError("exponent p must exceed 1", exponent_p=p)
        if isinstance(self.variant, SaturatedPower) and not 0 <= self.variant.q <= 1:
            raise ConfigValidationError("exponent q must lie in [0, 1]", exponent_q=self.variant.q)

    @classmethod
    def power(cls, p: float) -> "NonlinearitySpec":
        return cls(PowerLaw(float(p)))

    @classmethod
    def saturated(cls, p: float, q: float) -> "NonlinearitySpec":
        return cls(SaturatedPower(float(p), float(q)))

    @property
    def p(self) -> float:
        return self.variant.p

    @property
    def c_p(self) -> float:
        """lim g(u)/uᵖ as u → 0⁺; one for both families."""
        return 1.0

    @property
    def label(self) -> str:
        if isinstance(self.variant, PowerLaw):
            return f"u^{self.p:g}"
        return f"u^{self.p:g}/(1+u^{self.p - self.variant.q:g})"

    def value(self, u):
        """g(u) for u ≥ 0; negative arguments are clipped to 0."""
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        out = u**self.p
        if isinstance(self.variant, SaturatedPower):
            out = out / (1.0 + u ** (self.p - self.variant.q))
        return float(out) if out.ndim == 0 else out

    def __call__(self, u):
        return self.value(u)

    def derivative(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        p = self.p
        if isinstance(self.variant, PowerLaw):
            out = p * u ** (p - 1)
        else:
            q = self.variant.q
            r = p - q
            ur = u**r
            out = u ** (p - 1) * (p + q * ur) / (1.0 + ur) ** 2
        return float(out) if out.ndim == 0 else out

    def second_derivative(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        p = self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            if isinstance(self.variant, PowerLaw):
                out = p * (p - 1) * u ** (p - 2)
            else:
                q = self.variant.q
                r = p - q
                ur = u**r
                # d/du [u^(p−1)(p + q u^r)(1 + u^r)^(−2)]
                first = (p - 1) * u ** (p - 2) * (p + q * ur) / (1.0 + ur) ** 2
                second = u ** (p - 1) * q * r * u ** (r - 1) / (1.0 + ur) ** 2
                third = -2.0 * u ** (p - 1) * (p + q * ur) * r * u ** (r - 1) / (1.0 + ur) ** 3
                out = first + second + third
        return float(out) if np.ndim(out) == 0 else out

    def minimum_on(self, lo: float, hi: float) -> float:
        """min g on [lo, hi]; both families are increasing on ℝ⁺."""
        if hi < lo:
            raise ValueError("empty interval")
        return self.value(lo)

    def hypotheses(self) -> HypothesisFlags:
        p = self.p
        if isinstance(self.variant, PowerLaw):
            eta = (p - 1.0) / p
        else:
            # g ~ u^q at infinity with q ≤ 1, so g′ stays bounded
            eta = 0.0
        return HypothesisFlags(
            g_star=True,
            g_zero=True,
            g_zero_c1=True,
            g_zero_power=True,
            g_infinity=True,
            g_infinity_log=True,
            g_infinity_growth=True,
            growth_exponent_eta=eta,
            subharmonic_hypotheses=p >= 2.0,
        )
