"""Failure modes shared across the package.

Every error here signals a mathematically meaningful breakdown, not a
programming mistake: losing spacelikeness, a Newton iteration that cannot
descend, a curvature bound that fails its sampled validation, and so on.
"""

from __future__ import annotations


class SolitonLabError(Exception):
    """Base class for all package specific failures."""


class NotSpacelikeError(SolitonLabError):
    """A height function reached or exceeded gradient norm 1 somewhere."""

    def __init__(self, message, node=None, where=None, grad_norm=None):
        super().__init__(message)
        self.node = node
        self.where = where
        self.grad_norm = grad_norm


class DiscretizationError(SolitonLabError):
    """A domain cannot be meshed at the requested spacing."""


class NonConvergenceError(SolitonLabError):
    """Damped Newton ran out of iterations or of step size."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IntegrationError(SolitonLabError):
    """The radial integrator failed; the profile should never do this."""


class RangeError(SolitonLabError):
    """Evaluation requested outside the stored range of a profile or field."""


class BadCurvatureBoundError(SolitonLabError):
    """A quadratic chord bound failed validation on sampled sphere pairs."""


class ConstructionFailureError(SolitonLabError):
    """An exhaustion solve escaped its envelope sandwich."""

    def __init__(self, message, level=None, margin=None):
        super().__init__(message)
        self.level = level
        self.margin = margin


class NotConvexError(SolitonLabError):
    """Blow-down monotonicity failed, so the input was not convex."""


class FlowBlowupError(SolitonLabError):
    """Time stepping could not keep the evolving graph spacelike."""
