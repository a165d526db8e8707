"""Baselines, synthetic campus and desk-scale experiments."""
