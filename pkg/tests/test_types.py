"""Tests for type definitions and validation."""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from vecsparse.exceptions import InputError, SelectionIndexError
from vecsparse.types import (
    AttnConfig,
    FilterKind,
    FilterSpec,
    RowMask,
    SelectionSet,
    SelectMode,
    TileGeometry,
)


class TestEnums:
    """Test enum values used on the command line and in result files."""

    def test_filter_kinds(self) -> None:
        """Test filter kind values."""
        assert [k.value for k in FilterKind] == ["minS", "topK", "topP"]

    def test_select_modes(self) -> None:
        """Test select mode values."""
        assert SelectMode("one_pass") is SelectMode.ONE_PASS
        assert SelectMode("two_pass") is SelectMode.TWO_PASS


class TestAttnConfig:
    """Test AttnConfig model."""

    def test_default_scale(self) -> None:
        """Test scale defaults to 1/sqrt(D)."""
        cfg = AttnConfig(seq_len=8, head_dim=16)
        assert cfg.scale == pytest.approx(0.25)
        assert cfg.causal is False

    def test_explicit_scale(self) -> None:
        """Test an explicit scale is kept."""
        cfg = AttnConfig(seq_len=8, head_dim=16, scale=1.0)
        assert cfg.scale == 1.0

    def test_for_inputs(self) -> None:
        """Test building a config from operands."""
        q = np.zeros((5, 4), dtype=np.float32)
        k = np.zeros((9, 4), dtype=np.float32)
        cfg = AttnConfig.for_inputs(q, k, causal=True)
        assert (cfg.seq_len, cfg.head_dim, cfg.causal) == (9, 4, True)
        assert cfg.scale == pytest.approx(0.5)

    def test_rejects_empty(self) -> None:
        """Test zero sizes are rejected."""
        with pytest.raises(ValidationError):
            AttnConfig(seq_len=0, head_dim=4)

    def test_frozen(self) -> None:
        """Test config is immutable."""
        cfg = AttnConfig(seq_len=8, head_dim=4)
        with pytest.raises(ValidationError):
            cfg.seq_len = 9  # type: ignore[misc]


class TestTileGeometry:
    """Test TileGeometry model."""

    def test_defaults(self) -> None:
        """Test default geometry."""
        geom = TileGeometry()
        assert (geom.pq, geom.bk, geom.gk) == (64, 16, 16)
        assert geom.group_width == 256

    def test_rejects_zero(self) -> None:
        """Test sizes must be positive."""
        with pytest.raises(ValidationError):
            TileGeometry(bk=0)


class TestFilterSpec:
    """Test FilterSpec model."""

    def test_parameter_follows_kind(self) -> None:
        """Test the meaningful parameter is reported."""
        assert FilterSpec(kind=FilterKind.MINS, alpha=2.5).parameter == 2.5
        assert FilterSpec(kind=FilterKind.TOPK, k=7).parameter == 7.0
        assert FilterSpec(kind=FilterKind.TOPP, p=0.5).parameter == 0.5

    def test_rejects_bad_p(self) -> None:
        """Test p must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            FilterSpec(kind=FilterKind.TOPP, p=0.0)
        with pytest.raises(ValidationError):
            FilterSpec(kind=FilterKind.TOPP, p=1.5)

    def test_rejects_negative_alpha(self) -> None:
        """Test alpha must be non-negative."""
        with pytest.raises(ValidationError):
            FilterSpec(alpha=-1.0)


class TestRowMask:
    """Test RowMask model."""

    def test_basic(self) -> None:
        """Test a valid mask."""
        mask = RowMask(width=5, selected=[0, 2, 4])
        assert mask.count == 3
        assert mask.selected.dtype == np.int64

    def test_read_only(self) -> None:
        """Test selected indices cannot be modified."""
        mask = RowMask(width=5, selected=[1])
        with pytest.raises(ValueError):
            mask.selected[0] = 2

    def test_out_of_range(self) -> None:
        """Test an index past the row width is rejected."""
        with pytest.raises(SelectionIndexError):
            RowMask(width=3, selected=[0, 3])

    def test_not_ascending(self) -> None:
        """Test indices must be strictly ascending."""
        with pytest.raises(InputError):
            RowMask(width=5, selected=[2, 1])
        with pytest.raises(InputError):
            RowMask(width=5, selected=[1, 1])


class TestSelectionSet:
    """Test SelectionSet CSR layout."""

    def test_from_blocks(self) -> None:
        """Test building from per-block arrays sorts and deduplicates."""
        sel = SelectionSet.from_blocks(
            [[3, 1, 1], [], [0]], num_keys=4, num_queries=10, block_size=4
        )
        assert sel.num_blocks == 3
        assert sel.offsets.tolist() == [0, 2, 2, 3]
        assert sel.block(0).tolist() == [1, 3]
        assert sel.block(1).tolist() == []
        assert sel.counts.tolist() == [2, 0, 1]
        assert sel.block_rows(2) == (8, 10)

    def test_from_pairs(self) -> None:
        """Test building from unordered pairs."""
        sel = SelectionSet.from_pairs(
            np.array([1, 0, 1, 0]),
            np.array([2, 3, 0, 3]),
            num_keys=4,
            num_queries=8,
            block_size=4,
        )
        assert [b.tolist() for b in sel.blocks()] == [[3], [0, 2]]

    def test_full(self) -> None:
        """Test the full selection, causal and not."""
        full = SelectionSet.full(num_keys=6, num_queries=6, block_size=4)
        assert sel_lists(full) == [list(range(6)), list(range(6))]
        causal = SelectionSet.full(num_keys=6, num_queries=6, block_size=4, causal=True)
        assert sel_lists(causal) == [[0, 1, 2, 3], list(range(6))]

    def test_offsets_length(self) -> None:
        """Test offsets must have num_blocks + 1 entries."""
        with pytest.raises(InputError):
            SelectionSet(
                num_keys=4, num_queries=8, block_size=4, offsets=[0, 1], indices=[0]
            )

    def test_out_of_range_names_block(self) -> None:
        """Test an out-of-range index reports its block."""
        with pytest.raises(SelectionIndexError) as exc_info:
            SelectionSet(
                num_keys=4,
                num_queries=8,
                block_size=4,
                offsets=[0, 1, 2],
                indices=[0, 4],
            )
        assert exc_info.value.block == 1
        assert exc_info.value.index == 4

    def test_unsorted_block(self) -> None:
        """Test indices must ascend within a block."""
        with pytest.raises(InputError):
            SelectionSet(
                num_keys=4,
                num_queries=8,
                block_size=4,
                offsets=[0, 2, 3],
                indices=[2, 1, 0],
            )

    def test_descent_across_blocks_allowed(self) -> None:
        """Test ordering restarts at each block boundary."""
        sel = SelectionSet(
            num_keys=4, num_queries=8, block_size=4, offsets=[0, 2, 3], indices=[1, 2, 0]
        )
        assert sel.block(1).tolist() == [0]

    def test_causal_future_key(self) -> None:
        """Test a causal block cannot reference keys after its last row."""
        with pytest.raises(InputError):
            SelectionSet.from_blocks(
                [[4], [0]], num_keys=8, num_queries=8, block_size=4, causal=True
            )

    def test_superset_and_equals(self) -> None:
        """Test block-wise comparison helpers."""
        big = SelectionSet.from_blocks([[0, 1, 2], [3]], num_keys=4, num_queries=8, block_size=4)
        small = SelectionSet.from_blocks([[1], [3]], num_keys=4, num_queries=8, block_size=4)
        assert big.issuperset(small)
        assert not small.issuperset(big)
        assert big.equals(big)
        assert not big.equals(small)


def sel_lists(sel: SelectionSet) -> list[list[int]]:
    """Selection as nested lists."""
    return [b.tolist() for b in sel.blocks()]
