"""vecsparse Exceptions.

Custom exception hierarchy for clear error handling.
"""

from __future__ import annotations

from typing import Any


class VecSparseError(Exception):
    """Base exception for all vecsparse errors."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        self.message = message
        self.details = details or {}
        super().__init__(message)


class ConfigurationError(VecSparseError):
    """Invalid experiment configuration or command-line usage."""


class InputError(VecSparseError):
    """Malformed input data."""


class ShapeError(VecSparseError):
    """Operand shapes are inconsistent or empty."""

    def __init__(
        self,
        message: str,
        expected: Any | None = None,
        actual: Any | None = None,
    ) -> None:
        super().__init__(
            message,
            details={"expected": expected, "actual": actual},
        )
        self.expected = expected
        self.actual = actual


class ParameterError(VecSparseError):
    """A numeric parameter is outside its valid range."""

    def __init__(
        self,
        message: str,
        parameter: str | None = None,
        value: Any | None = None,
    ) -> None:
        super().__init__(
            message,
            details={"parameter": parameter, "value": value},
        )
        self.parameter = parameter
        self.value = value


class DegenerateRowError(VecSparseError):
    """A row has no finite or visible entry to normalise over."""

    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message, details={"row": row})
        self.row = row


class SelectionIndexError(VecSparseError):
    """A selected key index is out of range."""

    def __init__(
        self,
        message: str,
        block: int | None = None,
        index: int | None = None,
    ) -> None:
        super().__init__(message, details={"block": block, "index": index})
        self.block = block
        self.index = index


class InfeasibleError(VecSparseError):
    """Requested sparsity budget cannot be met."""

    def __init__(
        self,
        message: str,
        target: float | None = None,
        best: float | None = None,
    ) -> None:
        super().__init__(message, details={"target": target, "best": best})
        self.target = target
        self.best = best


class TensorFormatError(VecSparseError):
    """TensorFile bytes could not be parsed."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message, details={"offset": offset})
        self.offset = offset
