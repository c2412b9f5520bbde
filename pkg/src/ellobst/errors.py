"""Exception hierarchy shared by all modules."""


class EllobstError(Exception):
    """Base class for library errors."""


class DimensionError(EllobstError, ValueError):
    """Point or array dimension does not match the object it is used with."""


class ValidationError(EllobstError, ValueError):
    """Invalid parameters (nonpositive axes, bad trace, even grid size, ...)."""


class DegenerateFitError(EllobstError):
    """Point cloud cannot determine a quadric, or the fitted quadric is not an ellipsoid."""


class QuadratureError(EllobstError):
    """An integral failed to converge or a resolution cannot meet its tolerance."""


class ConvergenceError(EllobstError):
    """An iteration exceeded its budget.  ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class PreconditionError(EllobstError):
    """An experiment was requested outside the hypotheses it is valid under."""


class MembershipViolation(EllobstError):
    """A weighted centroid landed outside its body (impossible for convex bodies)."""
