"""Exception types for numerical failures (as opposed to usage errors)."""


class NumericalError(Exception):
    """Base class for failures of the numerical machinery."""


class NotPSDError(NumericalError):
    """A matrix or kernel that must be positive semidefinite is not."""


class NumericalBreakdownError(NumericalError):
    """A linear-algebra step produced non-finite or unusable intermediates."""
