"""Constrained optimisation by integrating a discontinuous projected-gradient field."""

__version__ = "0.1.0"
