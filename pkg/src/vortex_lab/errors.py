"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition (shape, range, step-size bound)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values.

    ``details`` carries whatever the failing routine knows (residuals, step
    index, point id) so callers can report it without parsing the message.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
