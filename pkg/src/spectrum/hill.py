"""Truncated Fourier–Galerkin spectrum of −(p w′)′ − q w = μ w.

Independent of the rotation machinery; used as an oracle for constant p and
trigonometric-polynomial q.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np
import scipy.linalg

from src.errors import PreconditionError
from src.spectrum.coefficients import SturmLiouvilleCoeffs

DEFAULT_MODES = 64


@dataclass(frozen=True)
class HillSpectrum:
    eigenvalues: np.ndarray
    modes: int

    @property
    def mu0(self) -> float:
        return float(self.eigenvalues[0])

    def pair(self, k: int) -> Tuple[float, float]:
        """(μ′ₖ, μ″ₖ)."""
        return float(self.eigenvalues[2 * k - 1]), float(self.eigenvalues[2 * k])


def hill_galerkin_spectrum(coeffs: SturmLiouvilleCoeffs, modes: int = DEFAULT_MODES) -> HillSpectrum:
    """Eigenvalues of the (2N+1)×(2N+1) matrix in the basis e^{inωt}, |n| ≤ N."""
    if coeffs.fourier is None or coeffs.p_constant is None:
        raise PreconditionError("the Galerkin oracle needs constant p and trigonometric q", provenance=coeffs.provenance)
    series = coeffs.fourier
    omega = 2 * math.pi / coeffs.period
    n = np.arange(-modes, modes + 1)
    diagonal = coeffs.p_constant * (n * omega) ** 2 - series.constant

    if series.order <= 1 and not any(series.sin):
        # real cosine harmonic only: the matrix is tridiagonal
        off = np.full(2 * modes, -0.5 * (series.cos[0] if series.cos else 0.0))
        eigenvalues = scipy.linalg.eigh_tridiagonal(diagonal, off, eigvals_only=True)
    else:
        matrix = np.diag(diagonal).astype(complex)
        for m in range(1, series.order + 1):
            q_hat = series.complex_coefficient(m)
            rows = np.arange(m, 2 * modes + 1)
            matrix[rows, rows - m] -= q_hat
            matrix[rows - m, rows] -= np.conj(q_hat)
        eigenvalues = scipy.linalg.eigh(matrix, eigvals_only=True)
    return HillSpectrum(np.sort(np.asarray(eigenvalues, dtype=float)), modes)
