"""Periodic orbits: shooting, multi-start search, scans and verification."""
