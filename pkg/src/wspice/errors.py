"""Exception types raised across the package."""


class WspiceError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(WspiceError, ValueError):
    """Input arrays have empty or inconsistent dimensions."""


class ZeroColumnError(WspiceError, ValueError):
    """A dictionary column has zero norm."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"dictionary column {index} has zero norm")


class NotPositiveDefiniteError(WspiceError, ValueError):
    """Covariance factorization failed even after jitter retries."""


class ZeroDataError(WspiceError, ValueError):
    """Snapshot data is identically zero."""


class NonpositiveWeightError(WspiceError, ValueError):
    """An iteration weight is zero or negative."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"weight {index} is not strictly positive")


class ConfigError(WspiceError, ValueError):
    """An estimator configuration is invalid or inconsistent."""


class LogOfZeroError(WspiceError, ValueError):
    """A log-based objective was requested at a zero power."""


class RankDeficientSupportError(WspiceError, ValueError):
    """Selected dictionary columns are linearly dependent."""


class NotConvergedError(WspiceError, RuntimeError):
    """A reference convex solve did not reach its certificate tolerance."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
