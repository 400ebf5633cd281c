"""Exception types shared across the package."""

from __future__ import annotations


class MPShrinkError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveSupport(MPShrinkError):
    """Population spectrum places mass at a location <= 0."""


class MassNotOne(MPShrinkError):
    """Population spectrum weights do not sum to one."""


class NoConvergence(MPShrinkError):
    """Fixed-point solver failed to reach the requested tolerance.

    Carries diagnostics: last residual and iteration count.
    """

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DomainError(MPShrinkError):
    """Operation called outside its domain of validity (e.g. gamma >= 1)."""


class GammaOne(MPShrinkError):
    """The aspect ratio gamma = 1 is excluded from boundary-value formulas."""


class EmptySupport(MPShrinkError):
    """No grid point exceeded the support detection threshold."""


class DegenerateDenominator(MPShrinkError):
    """Closed-form denominator too close to zero to evaluate."""


class ZeroBranchUnavailable(MPShrinkError):
    """The l = 0 overlap branch requires gamma < 1."""


class EmptyBin(MPShrinkError):
    """A requested bin carries no probability mass."""


class DegenerateSpan(MPShrinkError):
    """The span {I, S} collapsed and no projection could be computed."""
