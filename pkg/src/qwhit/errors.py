"""Exception types shared across the package."""


class QwhitError(ValueError):
    """Invalid input: a precondition of some operation does not hold."""


class BudgetError(QwhitError):
    """A problem size exceeds a configured memory or qubit budget."""


class NotConvergedError(RuntimeError):
    """A numerical iteration stopped before reaching its tolerance.

    The best available estimate is carried on ``partial`` so callers can
    still report it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
