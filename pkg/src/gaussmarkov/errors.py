"""Exception types shared across the package."""


class GaussMarkovError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GaussMarkovError):
    """Malformed argument: bad grid, shape mismatch, domain violation."""


class SingularMarginalError(GaussMarkovError):
    """A marginal covariance is singular or too ill-conditioned to invert."""


class ChainMismatchError(GaussMarkovError):
    """Consecutive transport plans do not share a marginal."""


class NotPsdError(GaussMarkovError):
    """A covariance matrix failed factorization even after jitter."""


class InvalidRateError(GaussMarkovError):
    """A decorrelation-rate function took a negative value."""


class InvalidSdeError(GaussMarkovError):
    """SDE coefficients are invalid at a sampled point (t, x)."""


class InvalidMeasureError(GaussMarkovError):
    """A spectral measure is not a symmetric probability measure."""


class UnsupportedDiagnosticError(GaussMarkovError):
    """Diagnostic undefined for the given inputs (e.g. infinite rate)."""


class BudgetExceededError(GaussMarkovError):
    """An integer search ran past its index budget.

    Carries whatever was computed before the budget ran out so callers can
    continue with partial results (the CLI maps this to exit code 3).
    """

    def __init__(self, message, indices=None, windows=None, partial_measure=None):
        super().__init__(message)
        self.indices = list(indices) if indices is not None else []
        self.windows = list(windows) if windows is not None else []
        self.partial_measure = partial_measure
