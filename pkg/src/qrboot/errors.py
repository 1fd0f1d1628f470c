"""Exception hierarchy shared by every module."""


class QRBootError(Exception):
    """Base class for all package errors."""


class DomainError(QRBootError, ValueError):
    """Input outside the domain of an operation (bad weights, lengths, specs)."""


class CapacityError(QRBootError):
    """A size guard was exceeded (support size, product blowup, outer reps)."""


class CapabilityError(QRBootError, NotImplementedError):
    """The operation is not available for this kind of input."""


class NumericError(QRBootError, ArithmeticError):
    """A numerical routine failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class EstimatorError(QRBootError):
    """An estimator failed on one bootstrap resample."""

    def __init__(self, message, resample_index=None):
        super().__init__(message)
        self.resample_index = resample_index
