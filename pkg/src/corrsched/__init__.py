"""Budgeted, defect-driven scheduling of projections in constrained rollouts."""

__version__ = "0.1.0"
