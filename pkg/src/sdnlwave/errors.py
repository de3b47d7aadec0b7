"""Shared exception types."""


class NumericalError(RuntimeError):
    """Raised when a computation leaves its trustworthy regime: field blow-up,
    an optimizer diverging, degenerate importance weights, a noise kernel that
    fails its positivity check.  Runs abort rather than clip or continue."""
