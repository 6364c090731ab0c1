"""Exports and the run ledger."""
