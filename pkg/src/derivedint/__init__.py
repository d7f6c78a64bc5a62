"""Exact finite-slice computations for derived intersections and formal neighborhoods."""

__version__ = "0.1.0"
