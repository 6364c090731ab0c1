"""Adaptive integration of the planar system and its variational flow."""
