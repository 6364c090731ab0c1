"""The extended force f_λ and the weight/nonlinearity bundle passed around the solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from src.problem.nonlinearity import NonlinearitySpec, PowerLaw
from src.problem.weights import WeightSpec


def extended_force(t, u, lam: float, weight: WeightSpec, g: NonlinearitySpec):
    """f_λ(t, u) = −u below zero, λ a(t) g(u) above; continuous at u = 0."""
    u_arr = np.asarray(u, dtype=float)
    upper = lam * weight.value(t) * g.value(u_arr)
    out = np.where(u_arr <= 0.0, -u_arr, upper)
    return float(out) if out.ndim == 0 else out


def extended_force_derivative(t, u, lam: float, weight: WeightSpec, g: NonlinearitySpec):
    """∂ᵤf_λ, taking the upper branch at u = 0 (one-sided, g′(0) = 0)."""
    u_arr = np.asarray(u, dtype=float)
    upper = lam * weight.value(t) * g.derivative(u_arr)
    out = np.where(u_arr < 0.0, -1.0, upper)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Problem:
    weight: WeightSpec
    nonlinearity: NonlinearitySpec

    @property
    def period(self) -> float:
        return self.weight.period

    def force(self, t, u, lam: float):
        return extended_force(t, u, lam, self.weight, self.nonlinearity)

    def force_derivative(self, t, u, lam: float):
        return extended_force_derivative(t, u, lam, self.weight, self.nonlinearity)

    def potential(self, t, u, lam: float):
        """∫₀ᵘ f_λ(t, s) ds for the autonomous energy check (closed form for power laws)."""
        u_arr = np.asarray(u, dtype=float)
        lower = -0.5 * u_arr**2
        g = self.nonlinearity
        if isinstance(g.variant, PowerLaw):
            upper = lam * self.weight.value(t) * np.maximum(u_arr, 0.0) ** (g.p + 1) / (g.p + 1)
        else:
            upper = np.vectorize(lambda x: quad(g.value, 0.0, max(x, 0.0))[0])(u_arr)
            upper = lam * self.weight.value(t) * upper
        out = np.where(u_arr <= 0.0, lower, upper)
        return float(out) if out.ndim == 0 else out
