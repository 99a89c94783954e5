"""Reduced security-constrained unit commitment assisted by spatio-temporal graph learning."""

__version__ = "0.1.0"
