"""Exception hierarchy shared by all modules."""


class FisherBoundError(Exception):
    """Base class for every error raised by this package."""


class InvalidSampleError(FisherBoundError, ValueError):
    pass


class TransformSpecError(FisherBoundError, ValueError):
    """Unknown or duplicated token in a transform spec string."""


class DomainError(FisherBoundError, ValueError):
    """Parameter outside the admissible domain of a model or formula."""


class InsufficientDataError(FisherBoundError, ValueError):
    pass


class ValidationError(FisherBoundError, ValueError):
    pass


class DegenerateCovarianceError(FisherBoundError, ArithmeticError):
    pass


class DegenerateWeightsError(FisherBoundError, ArithmeticError):
    pass


class DegenerateInformationError(FisherBoundError, ArithmeticError):
    """Zero or negative information; the variance bound is unbounded."""


class QuadratureError(FisherBoundError, ArithmeticError):
    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class UnsupportedError(FisherBoundError, NotImplementedError):
    pass


class EmptyCurveError(FisherBoundError, ValueError):
    pass


class RunFailedError(FisherBoundError, RuntimeError):
    """Too many grid points failed for the run to be trusted."""
