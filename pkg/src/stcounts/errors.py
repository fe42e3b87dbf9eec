"""Exception types shared across the package.

Validation problems (bad files, bad configuration, inconsistent inputs) and
numerical failures (factorization breakdown, non-convergence) are kept
separate so the CLI can map them to distinct exit codes.
"""


class ValidationError(ValueError):
    """Input data, configuration, or preconditions are invalid."""


class NumericalError(RuntimeError):
    """A numerical routine failed (factorization, optimization, sampling)."""


class NotPositiveDefiniteError(NumericalError):
    """Matrix handed to the Cholesky kernel is not positive definite."""

    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(f"matrix is not positive definite (pivot {pivot_index})")


class ApproximationError(NumericalError):
    """The inner Gaussian approximation diverged at some hyperparameter."""


class ModeSearchError(NumericalError):
    """Hyperparameter mode search stalled; carries the evaluation trace."""

    def __init__(self, message: str, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)
