class KftrackError(Exception):
    """Base class for all errors raised by kftrack."""


class ContractViolation(KftrackError, ValueError):
    """An operation was called with arguments outside its preconditions."""


class SingularMatrixError(KftrackError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""

    def __init__(self, message: str, condition: float = float('inf')):
        super().__init__(message)
        self.condition = condition


class DegenerateStateError(KftrackError, ArithmeticError):
    """A filtered state no longer decodes to a valid bounding box."""


class EstimationError(KftrackError, RuntimeError):
    """Robust estimation could not produce a model."""


class UndefinedMetricError(KftrackError, ValueError):
    """A metric was requested over an empty set of pairs."""


class ParseError(ContractViolation):
    """A line of an input file could not be parsed."""

    def __init__(self, path: str, line_number: int, reason: str):
        super().__init__('{}:{}: {}'.format(path, line_number, reason))
        self.path = path
        self.line_number = line_number
        self.reason = reason
