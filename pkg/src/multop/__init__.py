"""Multiplication operators on L^p at finite dyadic resolution."""

__version__ = "0.1.0"
