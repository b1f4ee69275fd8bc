"""Tests for exception classes."""

from __future__ import annotations

import pytest

from vecsparse.exceptions import (
    ConfigurationError,
    DegenerateRowError,
    InfeasibleError,
    InputError,
    ParameterError,
    SelectionIndexError,
    ShapeError,
    TensorFormatError,
    VecSparseError,
)


class TestVecSparseError:
    """Test base VecSparseError class."""

    def test_basic_error(self) -> None:
        """Test basic error creation."""
        error = VecSparseError("Something went wrong")
        assert str(error) == "Something went wrong"
        assert error.message == "Something went wrong"
        assert error.details == {}

    def test_error_with_details(self) -> None:
        """Test error with details."""
        error = VecSparseError("Bad", details={"row": 3})
        assert error.details["row"] == 3

    def test_error_can_be_raised(self) -> None:
        """Test error can be raised and caught."""
        with pytest.raises(VecSparseError, match="Test error"):
            raise VecSparseError("Test error")


class TestSubclasses:
    """Test the specific error types."""

    @pytest.mark.parametrize(
        "cls",
        [
            ConfigurationError,
            InputError,
            ShapeError,
            ParameterError,
            DegenerateRowError,
            SelectionIndexError,
            InfeasibleError,
            TensorFormatError,
        ],
    )
    def test_inherits_base(self, cls: type[VecSparseError]) -> None:
        """Every error is catchable as VecSparseError."""
        assert issubclass(cls, VecSparseError)

    def test_shape_error(self) -> None:
        """Test ShapeError carries expected and actual."""
        error = ShapeError("mismatch", expected=(4, 4), actual=(4, 3))
        assert error.expected == (4, 4)
        assert error.actual == (4, 3)
        assert error.details == {"expected": (4, 4), "actual": (4, 3)}

    def test_parameter_error(self) -> None:
        """Test ParameterError names the parameter."""
        error = ParameterError("alpha must be >= 0", parameter="alpha", value=-1.0)
        assert error.parameter == "alpha"
        assert error.value == -1.0

    def test_degenerate_row_error(self) -> None:
        """Test DegenerateRowError carries the row."""
        error = DegenerateRowError("empty", row=5)
        assert error.row == 5
        assert error.details["row"] == 5

    def test_selection_index_error(self) -> None:
        """Test SelectionIndexError carries block and index."""
        error = SelectionIndexError("out of range", block=2, index=99)
        assert error.block == 2
        assert error.index == 99

    def test_infeasible_error(self) -> None:
        """Test InfeasibleError carries target and best."""
        error = InfeasibleError("unreachable", target=0.9, best=0.5)
        assert error.target == 0.9
        assert error.best == 0.5

    def test_tensor_format_error_offset(self) -> None:
        """Test TensorFormatError names the byte offset in its message."""
        error = TensorFormatError("bad magic", offset=0)
        assert error.offset == 0
        assert "offset 0" in error.message

    def test_tensor_format_error_without_offset(self) -> None:
        """Test TensorFormatError without offset keeps the message."""
        error = TensorFormatError("bad")
        assert error.message == "bad"
        assert error.offset is None
