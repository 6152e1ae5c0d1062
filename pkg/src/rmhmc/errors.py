"""Exception types shared across the package."""


class RmhmcError(Exception):
    """Base class for all package errors."""


class MetricNotPositiveDefinite(RmhmcError):
    """The metric at the requested position admits no Cholesky factorization."""


class NonFiniteValue(RmhmcError):
    """A model evaluation or iterate produced NaN or infinity."""


class NonConvergence(RmhmcError):
    """The fixed-point iteration hit its cap with the update still above tolerance.

    Carries the partial result so callers (e.g. the sampler) can inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TrajectoryError(RmhmcError):
    """A multi-step integration failed part-way through.

    Attributes:
        step_index: zero-based index of the step that failed.
        steps: per-step records accumulated before the failure.
        cause: the underlying exception.
    """

    def __init__(self, step_index, cause, steps=()):
        super().__init__(f"integration failed at step {step_index}: {cause}")
        self.step_index = step_index
        self.cause = cause
        self.steps = list(steps)


class EigendecompositionFailure(RmhmcError):
    """Symmetric eigendecomposition did not converge."""


class ZeroVariance(RmhmcError):
    """A chain coordinate is constant, so autocorrelation is undefined."""


class EmptyInput(RmhmcError):
    """An operation requiring a non-empty collection received an empty one."""
