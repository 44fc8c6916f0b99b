"""Numerical toolkit for the two-dimensional Yukawa gas."""

__version__ = "0.1.0"
