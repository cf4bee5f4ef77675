"""Exception hierarchy shared across the package."""


class SynthadError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SynthadError, ValueError):
    """A parameter is outside its documented range."""


class UndefinedPointError(SynthadError, ArithmeticError):
    """A pointwise quantity is undefined (both densities vanish)."""


class ParseError(SynthadError, ValueError):
    """A data file could not be parsed; carries the offending row index."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SchemaError(SynthadError, ValueError):
    """Data disagrees with the declared schema."""


class ImputationError(SynthadError, ValueError):
    """Imputation is impossible (for example an all-missing column)."""


class ConfigurationError(SynthadError, ValueError):
    """An operation was configured inconsistently."""


class ShapeError(SynthadError, ValueError):
    """An array has the wrong dimensionality for the model."""


class NumericError(SynthadError, ArithmeticError):
    """Non-finite values appeared during computation."""


class TrainingDivergence(SynthadError, RuntimeError):
    """Training diverged; carries the history collected so far."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class UndefinedMetricError(SynthadError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class AUPR)."""
