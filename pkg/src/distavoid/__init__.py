"""Certified computations for distance-avoiding sets."""

__version__ = "0.1.0"
