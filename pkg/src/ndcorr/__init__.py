"""Correlation-based recovery of a 1D wave-guide area profile from boundary noise."""

__version__ = "0.1.0"
