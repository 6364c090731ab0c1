"""The Minkowski curvature operator φ(ξ) = ξ/√(1−ξ²) and its companions."""
from __future__ import annotations

from typing import Union

import numpy as np

from src.errors import CurvatureDomainError

ArrayLike = Union[float, np.ndarray]


class CurvatureOperator:
    """Fixed Minkowski operator; every method is vectorised over numpy arrays."""

    @staticmethod
    def phi(xi: ArrayLike) -> ArrayLike:
        xi = _check_open_interval(xi)
        return xi / np.sqrt(1.0 - xi * xi)

    @staticmethod
    def phi_inverse(v: ArrayLike) -> ArrayLike:
        v = np.asarray(v, dtype=float)
        out = v / np.sqrt(1.0 + v * v)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def phi_prime(xi: ArrayLike) -> ArrayLike:
        xi = _check_open_interval(xi)
        return (1.0 - xi * xi) ** -1.5

    @staticmethod
    def kinetic(v: ArrayLike) -> ArrayLike:
        """∫₀ᵛ φ⁻¹ = √(1 + v²) − 1, the kinetic part of the Hamiltonian."""
        v = np.asarray(v, dtype=float)
        out = np.sqrt(1.0 + v * v) - 1.0
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def lorentz_factor(v: ArrayLike) -> ArrayLike:
        """1/√(1 − φ⁻¹(v)²) expressed without cancellation as √(1 + v²)."""
        v = np.asarray(v, dtype=float)
        out = np.sqrt(1.0 + v * v)
        return float(out) if out.ndim == 0 else out


def _check_open_interval(xi: ArrayLike):
    arr = np.asarray(xi, dtype=float)
    if np.any(np.abs(arr) >= 1.0) or np.any(~np.isfinite(arr)):
        raise CurvatureDomainError("φ is only defined on ]−1, 1[", value=arr)
    return float(arr) if arr.ndim == 0 else arr


phi = CurvatureOperator.phi
phi_inverse = CurvatureOperator.phi_inverse
