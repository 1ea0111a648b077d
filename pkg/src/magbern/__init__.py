"""Numerical and symbolic checks for magnetic Bernstein and spectral
inequalities of the two-dimensional Landau operator."""

__version__ = "0.1.0"
