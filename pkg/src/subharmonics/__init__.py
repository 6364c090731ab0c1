"""Subharmonic solutions winding around the small T-periodic orbit."""
