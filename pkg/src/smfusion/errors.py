"""Exception types raised across the package."""


class SMFusionError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(SMFusionError, ValueError):
    pass


class NotPositiveDefinite(SMFusionError, ValueError):
    pass


class NotSymmetric(SMFusionError, ValueError):
    pass


class IndexOutOfRange(SMFusionError, IndexError):
    pass


class InvalidParameter(SMFusionError, ValueError):
    pass


class EvaluationFailure(SMFusionError, ArithmeticError):
    """A user-supplied map returned non-finite values."""


class InvalidSampleCount(SMFusionError, ValueError):
    pass


class InfeasibleStart(SMFusionError, ValueError):
    pass


class BudgetExhausted(SMFusionError, RuntimeError):
    pass


class NoFeasiblePoint(SMFusionError, RuntimeError):
    pass


class DegenerateInput(SMFusionError, ValueError):
    pass


class SingularFactor(SMFusionError, ArithmeticError):
    pass


class InfeasibleUpdate(SMFusionError, RuntimeError):
    """The tau program has no usable solution; the measurement set is inconsistent."""


class EmptyIntersection(SMFusionError, RuntimeError):
    pass


class RejectionBudgetExceeded(SMFusionError, RuntimeError):
    pass


class ConfigError(SMFusionError, ValueError):
    pass


class RunAborted(SMFusionError, RuntimeError):
    """Too many Monte Carlo trials aborted.

    Args:
        message: Diagnostic text.
        result: The partial run, with aborted trials listed, for inspection.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
