"""Exception types shared across the package."""


class UsageError(ValueError):
    """Operands violate a documented precondition (shape, degree, kind...)."""


class DomainError(ValueError):
    """A field was evaluated outside its chart (including the declared margin)."""


class DegenerateZeroError(ArithmeticError):
    """A zero is too degenerate for its local index to be determined."""


class UnsupportedError(NotImplementedError):
    """The request lies outside the implemented range (e.g. rank != 2 transgression)."""
