"""Tests for traffic and work accounting."""

from __future__ import annotations

from collections.abc import Callable

import pytest
from pydantic import ValidationError

from vecsparse.cost import (
    CostPhase,
    CostReport,
    HardwareSpec,
    calibrate_pass_count,
    context_sweep,
    flops_attention,
    report_from_counter,
    roofline_seconds,
    total_report,
    traffic_dense_attention,
    traffic_naive_select,
    traffic_sparse_attention,
    traffic_tiling_select,
)
from vecsparse.exceptions import ParameterError
from vecsparse.selection import TrafficCounter, exact_mins_select, tiling_select
from vecsparse.types import AttnConfig, TileGeometry

from .conftest import random_matrices


class TestNaiveSelect:
    """Test materialize-then-filter accounting."""

    def test_values(self) -> None:
        """Test byte counts for a small shape."""
        r = traffic_naive_select(64, 8, 16, rho=0.5)
        assert r.phase is CostPhase.SELECTION
        assert r.bytes_read == 1600
        assert r.bytes_written == 1040
        assert r.variable_bytes == 1024
        assert r.flops == 4096
        assert r.total_bytes == 2640

    def test_dominant_term_scaling(self) -> None:
        """Test the score-map round trip is quadratic in N and inverse in Pq."""
        base = traffic_naive_select(4096, 64, 64).variable_bytes
        assert traffic_naive_select(8192, 64, 64).variable_bytes == 4 * base
        assert traffic_naive_select(4096, 64, 128).variable_bytes * 2 == base

    def test_round_trip_at_64k(self) -> None:
        """Test the half-precision score-map round trip at N=64K, Pq=64."""
        r = traffic_naive_select(65536, 128, 64)
        assert r.variable_bytes == 2 * (65536**2 // 64) * 2
        assert r.variable_bytes == 256 * 2**20

    def test_passes_multiply_map_terms(self) -> None:
        """Test the pass multiplier scales only the map round trip."""
        one = traffic_naive_select(256, 16, 16)
        three = traffic_naive_select(256, 16, 16, passes=3)
        assert three.variable_bytes == 3 * one.variable_bytes
        assert three.total_bytes - one.total_bytes == 2 * one.variable_bytes


class TestTilingSelect:
    """Test tile-fused selection accounting."""

    def test_values(self) -> None:
        """Test byte counts for a small shape."""
        r = traffic_tiling_select(64, 8, 16, 0.5)
        assert r.bytes_read == 1088
        assert r.bytes_written == 528
        assert r.variable_bytes == 512

    def test_full_sparsity(self) -> None:
        """Test rho=1 leaves only the Q/K reads and the per-block counts."""
        r = traffic_tiling_select(64, 8, 16, 1.0)
        assert r.variable_bytes == 0
        assert r.bytes_read == (4 + 64) * 8 * 2
        assert r.bytes_written == 4 * 4

    def test_zero_sparsity_matches_naive_index_write(self) -> None:
        """Test rho=0 writes one index per pooled score."""
        r = traffic_tiling_select(64, 8, 16, 0.0)
        assert r.variable_bytes == 4 * 64 * 4

    def test_variable_ratio_at_rho_09(self) -> None:
        """Test naive moves about ten times the variable traffic at rho=0.9."""
        naive = traffic_naive_select(65536, 128, 64, rho=0.9)
        tiling = traffic_tiling_select(65536, 128, 64, 0.9)
        ratio = naive.variable_bytes / tiling.variable_bytes
        assert ratio == pytest.approx(10.0, rel=1e-6)
        assert 10.2 * 0.85 <= ratio <= 10.2 * 1.15

    def test_linear_in_kept_fraction(self) -> None:
        """Test the variable term scales with 1 - rho."""
        a = traffic_tiling_select(4096, 64, 64, 0.5).variable_bytes
        b = traffic_tiling_select(4096, 64, 64, 0.75).variable_bytes
        assert a == 2 * b

    @pytest.mark.parametrize("rho", [0.0, 0.25, 0.5, 0.9, 1.0])
    @pytest.mark.parametrize("passes", [1, 2.5])
    def test_never_above_naive(self, rho: float, passes: float) -> None:
        """Test tiling traffic never exceeds naive at matched pass count."""
        naive = traffic_naive_select(1024, 64, 32, rho=rho, passes=passes)
        tiling = traffic_tiling_select(1024, 64, 32, rho, passes=passes)
        assert tiling.total_bytes <= naive.total_bytes


class TestAttentionCosts:
    """Test attention-phase accounting."""

    def test_flops(self) -> None:
        """Test dense work and the kept fraction."""
        dense, sparse = flops_attention(64, 8)
        assert dense == 4 * 64 * 64 * 8
        assert sparse == dense
        dense, sparse = flops_attention(64, 8, 0.9)
        assert sparse == pytest.approx(0.1 * dense)

    def test_flops_fraction_at_17k(self) -> None:
        """Test 78.6% sparsity leaves 21.4% of the work."""
        dense, sparse = flops_attention(17000, 128, 0.786)
        assert sparse / dense == pytest.approx(0.214)

    def test_dense(self) -> None:
        """Test dense attention streams Q, K, V once."""
        r = traffic_dense_attention(64, 8)
        assert r.phase is CostPhase.DENSE_ATTENTION
        assert r.bytes_read == 3072
        assert r.bytes_written == 1024
        assert r.flops == 131072

    def test_sparse(self) -> None:
        """Test sparse attention gathers the kept rows."""
        r = traffic_sparse_attention(64, 8, 16, 0.5)
        assert r.phase is CostPhase.SPARSE_ATTENTION
        assert r.variable_bytes == 4608
        assert r.bytes_read == 5648
        assert r.bytes_written == 1024
        assert r.flops == 65536

    def test_hardware_widths(self) -> None:
        """Test element width scales the element traffic."""
        r = traffic_dense_attention(64, 8, HardwareSpec(element_bytes=4))
        assert r.bytes_read == 6144


class TestCalibratePassCount:
    """Test fitting the pass multiplier."""

    def test_round_trip(self) -> None:
        """Test the fitted pass count reproduces the observation."""
        observed = traffic_naive_select(1024, 64, 32, passes=3.5).total_bytes
        assert calibrate_pass_count(observed, 1024, 64, 32) == pytest.approx(3.5)

    def test_below_minimum(self) -> None:
        """Test an observation below the fixed traffic is rejected."""
        with pytest.raises(ParameterError):
            calibrate_pass_count(100, 1024, 64, 32)


class TestTotals:
    """Test report sums and counter conversion."""

    def test_total_report(self) -> None:
        """Test fields add across phases."""
        a = traffic_tiling_select(64, 8, 16, 0.5)
        b = traffic_sparse_attention(64, 8, 16, 0.5)
        t = total_report([a, b])
        assert t.phases == [CostPhase.SELECTION, CostPhase.SPARSE_ATTENTION]
        assert t.bytes_read == a.bytes_read + b.bytes_read
        assert t.bytes_written == a.bytes_written + b.bytes_written
        assert t.flops == a.flops + b.flops
        assert t.variable_bytes == a.variable_bytes + b.variable_bytes

    def test_empty_total(self) -> None:
        """Test the sum of nothing is zero."""
        t = total_report([])
        assert t.phases == []
        assert t.bytes_read == 0

    def test_exact_counter_matches_naive(self) -> None:
        """Test a recorded full selection agrees with the naive formula."""
        q, k, _ = random_matrices(3, 64, 8)
        counter = TrafficCounter()
        exact_mins_select(q, k, AttnConfig(seq_len=64, head_dim=8), 16, 1e9, counter=counter)
        recorded = report_from_counter(counter)
        expected = traffic_naive_select(64, 8, 16, rho=0.0)
        assert recorded.bytes_read == expected.bytes_read
        assert recorded.bytes_written == expected.bytes_written

    def test_tiling_counter_matches_formula(self) -> None:
        """Test a single-group tiling run agrees with the tiling formula."""
        q, k, _ = random_matrices(3, 64, 8)
        counter = TrafficCounter()
        geom = TileGeometry(pq=16, bk=8, gk=8)
        tiling_select(q, k, AttnConfig(seq_len=64, head_dim=8), geom, 1e9, counter=counter)
        recorded = report_from_counter(counter, flops=1.0)
        expected = traffic_tiling_select(64, 8, 16, 0.0)
        assert counter.groups == 1
        assert counter.phases == ["tiling_select"]
        assert recorded.bytes_read == expected.bytes_read
        assert recorded.bytes_written == expected.bytes_written
        assert recorded.variable_bytes == expected.variable_bytes
        assert recorded.flops == 1.0

class TestRoofline:
    """Test the two-ceiling time bound."""

    def test_memory_bound(self) -> None:
        """Test a slow memory makes bytes the bound."""
        hw = HardwareSpec(memory_bandwidth=1000.0, peak_flops=1e6)
        report = traffic_dense_attention(64, 8, hw)
        assert roofline_seconds(report, hw) == pytest.approx(4096 / 1000.0)

    def test_compute_bound(self) -> None:
        """Test a slow arithmetic unit makes flops the bound."""
        hw = HardwareSpec(memory_bandwidth=1e9, peak_flops=1e4)
        report = traffic_dense_attention(64, 8, hw)
        assert roofline_seconds(report, hw) == pytest.approx(131072 / 1e4)


class TestContextSweep:
    """Test the cost model across sequence lengths."""

    LENGTHS = (1024, 4096, 16384, 65536)

    def test_points_follow_lengths(self) -> None:
        """Test one point per length with consistent ratios."""
        points = context_sweep(self.LENGTHS, 128, 64, 0.9)
        assert [p.n for p in points] == list(self.LENGTHS)
        for p in points:
            naive = traffic_naive_select(p.n, 128, 64, rho=0.9)
            tiled = traffic_tiling_select(p.n, 128, 64, 0.9)
            assert p.naive_bytes == naive.total_bytes
            assert p.tiling_bytes == tiled.total_bytes
            assert p.traffic_ratio == pytest.approx(naive.total_bytes / tiled.total_bytes)
            assert p.speedup == pytest.approx(p.dense_seconds / p.sparse_seconds)

    def test_traffic_ratio_grows_with_length(self) -> None:
        """Test the score-map terms take over as length grows, bounded by their ratio."""
        ratios = [p.traffic_ratio for p in context_sweep(self.LENGTHS, 128, 64, 0.9)]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        # map round trip 2 * 2 bytes plus 10% of 4-byte indices, against the indices alone
        assert ratios[-1] < (2 * 2 + 0.1 * 4) / (0.1 * 4)

    def test_sparsity_pays_off_at_long_context(self) -> None:
        """Test high sparsity beats dense attention at 64K."""
        (point,) = context_sweep([65536], 128, 64, 0.9)
        assert point.speedup > 1.0

    def test_no_sparsity_never_pays_off(self) -> None:
        """Test selection plus full gathering is slower than dense everywhere."""
        assert all(p.speedup < 1.0 for p in context_sweep(self.LENGTHS, 128, 64, 0.0))



class TestValidation:
    """Test parameter checks."""

    @pytest.mark.parametrize(
        "call",
        [
            lambda: traffic_naive_select(0, 8, 16),
            lambda: traffic_naive_select(64, 8, 0),
            lambda: traffic_naive_select(64, 8, 16, rho=1.5),
            lambda: traffic_naive_select(64, 8, 16, passes=0),
            lambda: traffic_tiling_select(64, 8, 16, -0.1),
            lambda: flops_attention(64, 0),
            lambda: traffic_sparse_attention(64, 8, 16, 2.0),
            lambda: context_sweep([], 8, 16, 0.5),
            lambda: context_sweep([64, 0], 8, 16, 0.5),
        ],
    )
    def test_rejected(self, call: Callable[[], object]) -> None:
        """Test out-of-range sizes and ratios raise ParameterError."""
        with pytest.raises(ParameterError):
            call()

    def test_report_counts_non_negative(self) -> None:
        """Test negative counts fail validation."""
        with pytest.raises(ValidationError):
            CostReport(phase=CostPhase.SELECTION, bytes_read=-1, bytes_written=0, flops=0)

    def test_hardware_positive(self) -> None:
        """Test widths must be positive."""
        with pytest.raises(ValidationError):
            HardwareSpec(index_bytes=0)
        with pytest.raises(ValidationError):
            HardwareSpec(memory_bandwidth=0)
