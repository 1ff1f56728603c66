"""Birnbaum-Saunders nonlinear regression: maximum likelihood fitting and influence diagnostics."""

__version__ = "0.1.0"
