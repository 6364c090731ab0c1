"""Continuation in λ: branches, folds and the λ → ∞ diagnostics."""
