"""Exception hierarchy shared by the solver modules."""


class BalancedFlowError(Exception):
    """Base class for all package errors."""


class InvalidTruncationError(BalancedFlowError, ValueError):
    pass


class ShapeError(BalancedFlowError, ValueError):
    pass


class DomainError(BalancedFlowError, ValueError):
    pass


class DivergentIntegralError(BalancedFlowError, ValueError):
    pass


class QuadratureAccuracyError(BalancedFlowError, RuntimeError):
    """Tolerance not reached within the panel budget.

    The best available estimate is kept on ``estimate`` so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, estimate=None, index=None):
        super().__init__(message)
        self.estimate = estimate
        self.index = index


class StepFailure(BalancedFlowError, RuntimeError):
    def __init__(self, message, last_state=None, trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.trajectory = trajectory


class FalseConvergenceError(BalancedFlowError, RuntimeError):
    def __init__(self, message, residual_linf=None):
        super().__init__(message)
        self.residual_linf = residual_linf


class UnreachableTargetError(BalancedFlowError, ValueError):
    pass


class ConfigValidationError(BalancedFlowError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class SnapshotError(BalancedFlowError, ValueError):
    pass


class StageFailure(BalancedFlowError, RuntimeError):
    """A continuation stage failed to converge."""

    def __init__(self, message, last_result=None, stages=None):
        super().__init__(message)
        self.last_result = last_result
        self.stages = stages or []
