"""Exception hierarchy shared across critlab."""


class CritlabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ArgumentError(CritlabError, ValueError):
    exit_code = 2


class ShapeError(ArgumentError):
    """Dimension, length or qubit-support mismatch."""


class CapacityError(CritlabError):
    """Problem size above a configured hard cap."""

    exit_code = 4


class NumericError(CritlabError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    exit_code = 3


class IntegrationError(NumericError):
    """Adaptive integration gave up; carries whatever was computed so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OptimizationError(NumericError):
    pass


class DegenerateDataError(CritlabError, ValueError):
    """Scaling data with no overlap between curves."""

    exit_code = 3


class SingularMitigationError(ArgumentError):
    pass


class FitError(NumericError):
    pass
