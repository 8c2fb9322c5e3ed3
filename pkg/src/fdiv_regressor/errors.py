"""Exception hierarchy shared by every module and mapped to CLI exit codes."""

from typing import Optional


class FdivError(Exception):
    """Base class for all errors raised by fdiv_regressor."""


class ContractViolation(FdivError, ValueError):
    """A precondition of an operation was not met (shapes, ranges, counts)."""


class NumericError(FdivError, ArithmeticError):
    """NaN or Inf appeared in an input or in a training loss."""

    def __init__(
        self,
        message: str,
        epoch: Optional[int] = None,
        batch: Optional[int] = None,
    ):
        self.epoch = epoch
        self.batch = batch
        if epoch is not None:
            message = f"{message} (epoch {epoch}, batch {batch})"
        super().__init__(message)


class DataLoadError(FdivError):
    """A data or model file could not be read.

    When the problem is a single cell, ``row`` and ``column`` are 1-based
    positions counted over data rows (the header is not a row).
    """

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        row: Optional[int] = None,
        column: Optional[int] = None,
    ):
        self.path = path
        self.row = row
        self.column = column
        if row is not None and column is not None:
            message = f"row {row}, column {column}: {message}"
        elif row is not None:
            message = f"row {row}: {message}"
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
