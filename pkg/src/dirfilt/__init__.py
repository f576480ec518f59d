"""Directivity-pattern design, compact-array simulation, and pattern-conditioned filtering."""

__version__ = "0.1.0"
