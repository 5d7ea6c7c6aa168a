"""Exception hierarchy shared by every module of the package."""


class RehssError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(RehssError, ValueError):
    pass


class NotSPD(RehssError):
    """A Cholesky pivot fell at or below the pivot floor."""

    def __init__(self, message, pivot_index=None, pivot=None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot = pivot


class Asymmetric(RehssError, ValueError):
    pass


class MaxIterations(RehssError):
    """An iterative routine ran out of iterations.

    ``last`` carries whatever the routine had when it gave up (an iterate or
    an estimate), so callers can still inspect it.
    """

    def __init__(self, message, iterations=None, last=None):
        super().__init__(message)
        self.iterations = iterations
        self.last = last


class BreakdownNonSPD(RehssError):
    """CG met a direction with non-positive curvature."""


class InvalidAlpha(RehssError, ValueError):
    pass


class DenseLimitExceeded(RehssError):
    pass


class Diverged(RehssError):
    pass


class RankRepairFailed(RehssError):
    pass


class ValidationFailed(RehssError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ParseError(RehssError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedField(RehssError, ValueError):
    pass
