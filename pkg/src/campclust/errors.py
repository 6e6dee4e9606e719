"""Exception hierarchy. Each family maps to a CLI exit code."""

from __future__ import annotations


class CampclustError(Exception):
    exit_code = 1


class ConfigError(CampclustError):
    exit_code = 2


class DataError(CampclustError):
    exit_code = 3


class NumericError(CampclustError):
    exit_code = 4


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        if row is not None or column is not None:
            message = f"{message} (row {row}, column {column!r})"
        super().__init__(message)


class ColumnLookupError(DataError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class KindError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class IncompleteDataError(DataError):
    pass


class CardinalityError(DataError):
    pass


class AssignmentError(DataError):
    pass


class UnimputableError(DataError):
    pass


class DependencyError(DataError):
    """A stage input produced by an upstream stage is missing."""


class UndefinedMomentsError(NumericError):
    pass


class ConstantColumnError(NumericError):
    pass


class UndefinedCorrelationError(NumericError):
    pass


class InsufficientVarianceError(NumericError):
    pass


class DomainError(NumericError, ValueError):
    pass


class SpecError(ConfigError, ValueError):
    pass


class RangeError(ConfigError, ValueError):
    pass
