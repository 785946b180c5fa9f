"""Exception types raised across the package."""


class MultihomodyneError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MultihomodyneError, ValueError):
    """An argument violates an operation's contract."""


class SingularMatrixError(MultihomodyneError, ArithmeticError):
    """A matrix required to be positive-definite is not.

    Carries the index of the failing Cholesky pivot when known.
    """

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class EstimationFailureError(MultihomodyneError, RuntimeError):
    """Likelihood maximisation could not bracket a root of the score.

    ``fallback`` holds the grid argmax as a diagnostic, not an estimate.
    """

    def __init__(self, message: str, fallback: float | None = None):
        super().__init__(message)
        self.fallback = fallback


class ExperimentFailureError(MultihomodyneError, RuntimeError):
    """Too many per-trial failures for an experiment to be trusted."""


class ConfigError(MultihomodyneError, ValueError):
    """A CLI configuration document failed validation.

    ``path`` locates the offending field, e.g. ``$.probe.beta``.
    """

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
