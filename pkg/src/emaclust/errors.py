"""Exception hierarchy shared across the package."""


class EmaclustError(Exception):
    """Base class for all errors raised by emaclust."""


class SchemaError(EmaclustError):
    """Malformed CSV header or file layout."""


class ParseError(EmaclustError):
    """A cell could not be parsed as a number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateError(EmaclustError):
    """Duplicate (individual_id, time_index) rows."""


class EmptyPanelError(EmaclustError):
    """An operation produced or received a panel with no individuals."""


class InsufficientDataError(EmaclustError):
    """Too few observations to build pairs, split, or fit a model."""


class SingularFitError(EmaclustError):
    """Linear system is rank deficient even after ridge regularization."""


class ShapeError(EmaclustError, ValueError):
    """Dimension mismatch between inputs."""


class InvalidKError(EmaclustError, ValueError):
    """Requested number of clusters is outside the admissible range."""


class UndefinedMetricError(EmaclustError):
    """Metric is undefined for the given partition (e.g. one cluster)."""


class ConfigError(EmaclustError):
    """Unknown or invalid configuration key or value."""
