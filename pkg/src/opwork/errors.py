"""Exception hierarchy.

Every error carries a machine-readable ``category`` so the CLI can map it to
an exit code without string matching.
"""


class OpworkError(Exception):
    category = "error"


class ValidationError(OpworkError, ValueError):
    """Malformed input: wrong shape, non-Hermitian, bad probabilities, ..."""

    category = "validation"

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DomainError(OpworkError, ValueError):
    """A matrix function was asked for outside its domain (e.g. log of a singular matrix)."""

    category = "domain"

    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class RangeError(OpworkError, OverflowError):
    category = "range"


class ConstructionError(OpworkError, ValueError):
    """A channel or operator could not be built with the requested guarantees."""

    category = "construction"


class InequalityViolation(OpworkError, ArithmeticError):
    """A proven inequality failed numerically. Always indicates a bug."""

    category = "inequality-violation"
