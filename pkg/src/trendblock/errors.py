"""Exception hierarchy shared across the package."""


class TrendBlockError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(TrendBlockError, ValueError):
    """Raised on malformed inputs (out-of-range lambdas, bad labels, ...)."""


class InfeasibleError(TrendBlockError):
    """A requested object cannot be produced for the given parameters.

    ``smallest_b`` carries the smallest supported number of blocks when the
    failure is about the block count, ``None`` otherwise.
    """

    def __init__(self, message, smallest_b=None):
        super().__init__(message)
        self.smallest_b = smallest_b


class BudgetExceededError(TrendBlockError):
    """An enumeration or search would exceed its configured budget."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class SingularCovarianceError(TrendBlockError, ValueError):
    pass


class DegenerateModelError(TrendBlockError, ValueError):
    pass
