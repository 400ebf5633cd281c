"""Limiting spectral objects of large sample covariance matrices.

Self-consistent Stieltjes transform of the sample spectral law, generalized
weighted resolvent functionals, the sample/population eigenvector overlap
kernel, the asymptotically optimal nonlinear shrinkage corrections for a
covariance matrix and its inverse, and a Monte-Carlo harness that validates
all of it against finite-size simulations.
"""

__version__ = "0.1.0"

from . import errors, functionals, overlap, shrinkage, simulate, spectrum, stieltjes

__all__ = [
    "__version__",
    "errors",
    "functionals",
    "overlap",
    "shrinkage",
    "simulate",
    "spectrum",
    "stieltjes",
]
