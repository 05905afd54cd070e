"""Exception hierarchy shared by all neimkit modules."""


class NeimkitError(Exception):
    """Base class for every error raised by this package."""


class ConvergenceError(NeimkitError):
    """An iterative method hit its iteration limit."""


class SingularMatrixError(NeimkitError):
    """A linear system is singular to working tolerance."""


class ConfigurationError(NeimkitError, ValueError):
    """Invalid configuration values."""


class DimensionError(NeimkitError, ValueError):
    """Array shapes do not match."""


class DataError(NeimkitError, ValueError):
    """Input data is empty, non-finite or otherwise unusable."""


class DivergenceError(NeimkitError):
    """Network training produced a non-finite loss."""

    def __init__(self, message, epoch=None, step=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class DegeneracyError(NeimkitError):
    """A greedy construction ran out of independent directions."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ExhaustionError(NeimkitError):
    """Every candidate parameter has already been selected."""
