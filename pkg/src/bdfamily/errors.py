"""Exception and warning types shared across the package."""


class BDFamilyError(Exception):
    """Base class for all package errors."""


class EvaluationFailure(BDFamilyError):
    """A coefficient evaluator returned non-finite values."""


class InversionFailure(BDFamilyError):
    """Monotone inversion of the coordinate change failed (non-monotone map)."""


class DivergentIntegral(BDFamilyError):
    """Tail of a semi-infinite integral fails to decay."""


class DivergentSum(BDFamilyError):
    """Partial sums of a series fail the tail test."""


class BracketFailure(BDFamilyError):
    """Root bracketing failed: no sign change on the search interval."""


class PositivityViolation(BDFamilyError):
    """The discrete positivity condition fails at some site."""

    def __init__(self, message, site=None, x=None):
        super().__init__(message)
        self.site = site
        self.x = x


class PositivityLoss(BDFamilyError):
    """A time step produced a negative density (step size too large)."""

    def __init__(self, message, site=None, t=None):
        super().__init__(message)
        self.site = site
        self.t = t


class MassDrift(BDFamilyError):
    """Conserved mass drifted beyond tolerance during a step."""


class InvalidTheta(BDFamilyError):
    """An order parameter outside the valid range for the requested bound."""


class InsufficientData(BDFamilyError):
    """Not enough records to perform a fit."""


class NonPositiveEnergy(BDFamilyError):
    """A fit encountered non-positive normalized free energy."""


class StepFailure(BDFamilyError):
    """A run aborted mid-integration; carries the failing time."""

    def __init__(self, message, t=None, cause=None):
        super().__init__(message)
        self.t = t
        self.cause = cause


class NonMonotoneWarning(UserWarning):
    """The constraint residual map appears non-monotone on the bracket."""
