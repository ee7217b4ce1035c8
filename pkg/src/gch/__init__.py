"""Numerical toolkit for norm inflation in a higher-order generalized Camassa-Holm equation."""

__version__ = "0.1.0"
