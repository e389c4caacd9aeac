"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


class NotErgodicError(DomainError):
    """The chain variant has no invariant law (absorbing state at 0)."""


class ConvergenceError(RuntimeError):
    """An iterative computation failed to converge within its budget."""


class EventCapError(RuntimeError):
    """A simulation exceeded its configured event budget."""
