"""Annealed continuous-spin models on generalized random graphs."""

__version__ = "0.1.0"
