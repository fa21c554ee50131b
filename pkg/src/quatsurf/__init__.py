"""Quaternionic calculus for conformal maps from planar disks into R^4."""

__version__ = "0.1.0"
