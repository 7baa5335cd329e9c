"""Exception types shared across the package."""


class BalassoError(Exception):
    """Base class for all package-specific errors."""


class DataError(BalassoError, ValueError):
    """A dataset or input file violates the model's requirements."""


class InvalidResponseError(DataError):
    """Response values are incompatible with the chosen family."""


class MissingInterceptError(DataError):
    """The first column of the fixed-effect design is not all ones."""


class DimensionMismatchError(DataError):
    """Array shapes are mutually inconsistent."""


class EmptyClusterError(DataError):
    """A cluster contains no observations."""


class CsvFormatError(DataError):
    """A CSV file could not be parsed into a dataset."""


class NumericalError(BalassoError, RuntimeError):
    """A numerical routine failed to produce a usable result."""


class PredictorOverflowError(NumericalError):
    """A linear predictor is so large that exp() would overflow."""

    def __init__(self, message, observation=None):
        super().__init__(message)
        self.observation = observation


class MaxIterExceededError(NumericalError):
    """An iterative routine hit its iteration cap without converging."""


class StalledLineSearchError(NumericalError):
    """Backtracking failed to find an acceptable step.

    Usually signals an inconsistency between the objective and the
    gradient/curvature fed to the line search.
    """
