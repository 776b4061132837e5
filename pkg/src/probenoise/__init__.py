"""Probe-induced noise on quantum measurements and incompatibility robustness."""

__version__ = "0.1.0"
