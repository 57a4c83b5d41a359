"""Exception and warning types shared across the estimators."""


class EstimationError(Exception):
    """Base class for all failures raised by this package."""


class InvalidInputError(EstimationError, ValueError):
    """Input data or configuration violates a documented precondition."""


class NumericalFailureError(EstimationError, RuntimeError):
    """An inner solver failed to reach its tolerance.

    Optional keyword arguments are stored in ``diagnostics`` for
    post-mortem inspection.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class FailedToConvergeError(NumericalFailureError):
    """The iteration collapsed or diverged, typically on degenerate samples."""


class InfeasibleConstraintError(InvalidInputError):
    """The equality constraints admit no usable nonnegative solution."""


class DegenerateDataError(NumericalFailureError):
    """The sample configuration leaves the objective unbounded below."""


class DegenerateSpectrumWarning(UserWarning):
    """Eigenvalue tie at a subspace split; the reported split is arbitrary."""
