"""Minkowski-curvature periodic solutions laboratory."""

__version__ = "0.1.0"
