"""Exception types raised by the package.

The CLI maps ``DataError`` to exit code 3 and ``FitError`` to exit code 4.
"""


class RSKError(Exception):
    """Base class for all package errors."""


class DataError(RSKError, ValueError):
    """Input data is malformed or violates a data invariant."""


class ParseError(DataError):
    """A CSV file could not be parsed."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ZeroScaleError(DataError):
    """A row has zero spread and cannot be standardized."""

    def __init__(self, case_id):
        super().__init__(f"case {case_id!r} has zero scale; cannot standardize")
        self.case_id = case_id


class FitError(RSKError):
    """A clustering fit failed for numerical reasons."""


class EmptyClusterError(FitError):
    def __init__(self, cluster):
        super().__init__(f"cluster {cluster} is empty")
        self.cluster = cluster


class DegenerateObjectiveError(FitError):
    """Every between-cluster component is non-positive; no feature can be weighted."""
