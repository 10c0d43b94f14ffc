"""Finite-cutoff laboratory for sewing identities of free and P(phi)_2 fields on flat cylinders."""

__version__ = "0.1.0"
