"""Operational work bounds for small driven quantum systems."""

__version__ = "0.1.0"
