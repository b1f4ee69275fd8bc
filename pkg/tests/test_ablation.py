"""Tests for the tile geometry ablation."""

from __future__ import annotations

import numpy as np
import pytest

from vecsparse.ablation import GeometryPoint, geometry_ablation, geometry_grid
from vecsparse.exceptions import ParameterError
from vecsparse.types import AttnConfig, SelectMode, TileGeometry


class TestGeometryGrid:
    """Test grid construction."""

    def test_product_order(self) -> None:
        """Test every combination appears with pq varying slowest."""
        grid = geometry_grid([16, 32], [8], [1, 4])
        assert [(g.pq, g.bk, g.gk) for g in grid] == [
            (16, 8, 1),
            (16, 8, 4),
            (32, 8, 1),
            (32, 8, 4),
        ]

    def test_empty_axis(self) -> None:
        """Test an empty size list is rejected."""
        with pytest.raises(ParameterError, match="gk"):
            geometry_grid([16], [8], [])


class TestGeometryAblation:
    """Test per-geometry selection and error."""

    def test_full_margin_is_dense(self, qkv: tuple, attn_config: AttnConfig) -> None:
        """Test an unbounded margin keeps everything for every geometry."""
        q, k, v = qkv
        points = geometry_ablation(q, k, v, attn_config, geometry_grid([16, 64], [8], [2]), 1e9)
        for p in points:
            assert p.sparsity == 0.0
            assert p.over_selection == 0.0
            assert p.rel_fro < 1e-5

    def test_larger_groups_select_less(self, qkv: tuple, attn_config: AttnConfig) -> None:
        """Test nested groups never select more keys than their sub-groups."""
        q, k, v = qkv
        grid = geometry_grid([16], [8], [1, 2, 4, 8, 32])
        points = geometry_ablation(q, k, v, attn_config, grid, 0.3)
        selected = [p.selected for p in points]
        assert all(b <= a for a, b in zip(selected, selected[1:]))
        assert selected[0] > selected[-1]
        assert all(p.exact_sparsity == points[0].exact_sparsity for p in points)

    def test_single_group_two_pass_matches_exact(
        self, qkv: tuple, attn_config: AttnConfig
    ) -> None:
        """Test no over-selection once one group spans every key."""
        q, k, v = qkv
        (point,) = geometry_ablation(
            q, k, v, attn_config, [TileGeometry(pq=16, bk=8, gk=32)], 1.0,
            mode=SelectMode.TWO_PASS,
        )  # fmt: skip
        assert point.mode is SelectMode.TWO_PASS
        assert point.over_selection == 0.0
        assert point.sparsity == pytest.approx(point.exact_sparsity)

    @pytest.mark.parametrize("causal", [False, True])
    def test_over_selection_non_negative(self, small_qkv: tuple, causal: bool) -> None:
        """Test tiled selection covers at least exact minS, causal or not."""
        q, k, v = small_qkv
        cfg = AttnConfig.for_inputs(q, k, causal=causal)
        points = geometry_ablation(q, k, v, cfg, geometry_grid([4, 8], [3, 5], [1, 2]), 0.5)
        assert len(points) == 8
        for p in points:
            assert p.over_selection >= 0.0
            assert p.sparsity <= p.exact_sparsity + 1e-12
            assert np.isfinite(p.rel_fro)

    def test_threads_keep_order(self, qkv: tuple, attn_config: AttnConfig) -> None:
        """Test worker threads do not change results or their order."""
        q, k, v = qkv
        grid = geometry_grid([16, 32], [8, 16], [2])
        serial = geometry_ablation(q, k, v, attn_config, grid, 1.0)
        threaded = geometry_ablation(q, k, v, attn_config, grid, 1.0, threads=3)
        assert serial == threaded
        assert [(p.pq, p.bk) for p in serial] == [(16, 8), (16, 16), (32, 8), (32, 16)]

    def test_errors(self, qkv: tuple, attn_config: AttnConfig) -> None:
        """Test an empty grid and a negative margin."""
        q, k, v = qkv
        with pytest.raises(ParameterError):
            geometry_ablation(q, k, v, attn_config, [], 1.0)
        with pytest.raises(ParameterError):
            geometry_ablation(q, k, v, attn_config, [TileGeometry()], -1.0)

    def test_point_serializes(self) -> None:
        """Test points serialize with the selection mode value."""
        p = GeometryPoint(
            pq=16, bk=8, gk=2, mode=SelectMode.ONE_PASS, selected=10, sparsity=0.5,
            exact_sparsity=0.6, over_selection=0.25, rel_fro=0.01, max_abs=0.02,
        )  # fmt: skip
        assert p.model_dump(mode="json")["mode"] == "one_pass"
