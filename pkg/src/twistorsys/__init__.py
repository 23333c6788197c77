"""Numerical checks for vertically harmonic twistor lifts of conformal
immersions in 4-dimensional model spaces, and the graded zero-curvature
system their adapted frames solve."""

from . import cli, ellsys, fixtures, forms, immersion, lagrangian, liealg, octo, symspace

__version__ = "0.1.0"

__all__ = ["cli", "ellsys", "fixtures", "forms", "immersion", "lagrangian",
           "liealg", "octo", "symspace", "__version__"]
