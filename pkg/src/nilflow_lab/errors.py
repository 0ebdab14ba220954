"""Exception hierarchy shared by all modules."""


class NilflowError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(NilflowError, ValueError):
    pass


class NumericSingularityError(NilflowError, ArithmeticError):
    pass


class DegenerateFrameError(NilflowError, ValueError):
    """The frame has no first return to the transverse torus along some generator."""


class ToleranceNotMetError(NilflowError):
    """Quadrature budget ran out before the requested tolerance was reached."""

    def __init__(self, message, coarse=None, fine=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


class TruncationInsufficientError(NilflowError):
    pass


class BudgetExceededError(NilflowError):
    pass
