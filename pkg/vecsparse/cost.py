"""Memory-traffic and arithmetic accounting.

Byte counts follow the data each stage moves to and from main memory:

- naive selection writes the whole pooled score map, reads it back to
  filter, then writes the selected indices
- tiling selection filters inside the tile loop, so only indices leave it
- dense attention streams Q, K and V once
- sparse attention gathers only the selected K/V rows per query block

``passes`` multiplies the terms that scale with the score map. It stands in
for extra sweeps (softmax, sort, precision conversion) a particular
implementation makes and can be fitted to a measured byte count with
:func:`calibrate_pass_count`.
"""

from __future__ import annotations

from collections.abc import Iterable
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from vecsparse.exceptions import ParameterError
from vecsparse.selection import TrafficCounter


class CostPhase(str, Enum):
    """Pipeline stage a report describes."""

    SELECTION = "selection"
    SPARSE_ATTENTION = "sparse_attention"
    DENSE_ATTENTION = "dense_attention"


class HardwareSpec(BaseModel):
    """Storage widths in bytes and the two roofline ceilings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    element_bytes: int = Field(default=2, ge=1, description="Bytes per stored element")
    index_bytes: int = Field(default=4, ge=1, description="Bytes per stored index")
    memory_bandwidth: float = Field(default=1.935e12, gt=0, description="Memory bytes per second")
    peak_flops: float = Field(default=312e12, gt=0, description="Arithmetic peak per second")


class CostReport(BaseModel):
    """Traffic and work of one stage.

    ``variable_bytes`` is the part of the traffic that scales with the score
    map (or, for sparse attention, with the kept fraction).
    """

    model_config = ConfigDict(frozen=True)

    phase: CostPhase
    bytes_read: int = Field(..., ge=0)
    bytes_written: int = Field(..., ge=0)
    flops: float = Field(..., ge=0)
    variable_bytes: int = Field(default=0, ge=0)

    @property
    def total_bytes(self) -> int:
        return self.bytes_read + self.bytes_written


class CostTotals(BaseModel):
    """Sum of several reports."""

    model_config = ConfigDict(frozen=True)

    phases: list[CostPhase] = Field(default_factory=list)
    bytes_read: int = 0
    bytes_written: int = 0
    flops: float = 0.0
    variable_bytes: int = 0


def _check_dims(n: int, d: int, pq: int = 1) -> None:
    for name, value in (("n", n), ("d", d), ("pq", pq)):
        if value < 1:
            msg = f"{name} must be >= 1"
            raise ParameterError(msg, parameter=name, value=value)


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho <= 1.0:
        msg = "rho must lie in [0, 1]"
        raise ParameterError(msg, parameter="rho", value=rho)


def _check_passes(passes: float) -> None:
    if passes <= 0:
        msg = "passes must be > 0"
        raise ParameterError(msg, parameter="passes", value=passes)


def _pooled_rows(n: int, pq: int) -> int:
    return -(-n // pq)


def traffic_naive_select(
    n: int,
    d: int,
    pq: int,
    hw: HardwareSpec | None = None,
    *,
    rho: float = 0.0,
    passes: float = 1.0,
) -> CostReport:
    """Materialize the pooled score map, read it back, write indices.

    Args:
        n: Sequence length
        d: Head dimension
        pq: Query pool size
        hw: Storage widths
        rho: Sparsity of the resulting selection (sizes the index write)
        passes: Score-map round trips

    Raises:
        ParameterError: On non-positive sizes, rho outside [0, 1] or passes <= 0
    """
    hw = hw or HardwareSpec()
    _check_dims(n, d, pq)
    _check_rho(rho)
    _check_passes(passes)
    np_rows = _pooled_rows(n, pq)
    scores = np_rows * n
    fixed_read = (np_rows + n) * d * hw.element_bytes
    map_pass = round(passes * scores * hw.element_bytes)
    indices = round(scores * (1.0 - rho)) * hw.index_bytes
    return CostReport(
        phase=CostPhase.SELECTION,
        bytes_read=fixed_read + map_pass,
        bytes_written=map_pass + indices + np_rows * hw.index_bytes,
        flops=2.0 * scores * d,
        variable_bytes=2 * map_pass,
    )


def traffic_tiling_select(
    n: int,
    d: int,
    pq: int,
    rho: float,
    hw: HardwareSpec | None = None,
    *,
    passes: float = 1.0,
) -> CostReport:
    """Tile-fused selection: only selected indices and per-block counts are written.

    Raises:
        ParameterError: On non-positive sizes, rho outside [0, 1] or passes <= 0
    """
    hw = hw or HardwareSpec()
    _check_dims(n, d, pq)
    _check_rho(rho)
    _check_passes(passes)
    np_rows = _pooled_rows(n, pq)
    scores = np_rows * n
    indices = round(passes * scores * (1.0 - rho) * hw.index_bytes)
    return CostReport(
        phase=CostPhase.SELECTION,
        bytes_read=(np_rows + n) * d * hw.element_bytes,
        bytes_written=indices + np_rows * hw.index_bytes,
        flops=2.0 * scores * d,
        variable_bytes=indices,
    )


def flops_attention(n: int, d: int, rho: float = 0.0) -> tuple[float, float]:
    """Dense and sparse attention work, counting QK^T and AV multiply-adds as 2 each.

    Returns:
        ``(dense, sparse)`` with ``sparse = dense * (1 - rho)``
    """
    _check_dims(n, d)
    _check_rho(rho)
    dense = 4.0 * n * n * d
    return dense, dense * (1.0 - rho)


def traffic_dense_attention(n: int, d: int, hw: HardwareSpec | None = None) -> CostReport:
    """Stream Q, K and V once and write O."""
    hw = hw or HardwareSpec()
    _check_dims(n, d)
    dense, _ = flops_attention(n, d)
    return CostReport(
        phase=CostPhase.DENSE_ATTENTION,
        bytes_read=3 * n * d * hw.element_bytes,
        bytes_written=n * d * hw.element_bytes,
        flops=dense,
    )


def traffic_sparse_attention(
    n: int,
    d: int,
    pq: int,
    rho: float,
    hw: HardwareSpec | None = None,
) -> CostReport:
    """Gather-load the kept K/V rows of every query block.

    Each of the ``ceil(n / pq)`` blocks reads its index list and
    ``n * (1 - rho)`` key and value rows.
    """
    hw = hw or HardwareSpec()
    _check_dims(n, d, pq)
    _check_rho(rho)
    np_rows = _pooled_rows(n, pq)
    kept = round(np_rows * n * (1.0 - rho))
    gathered = 2 * kept * d * hw.element_bytes + kept * hw.index_bytes
    _, sparse = flops_attention(n, d, rho)
    return CostReport(
        phase=CostPhase.SPARSE_ATTENTION,
        bytes_read=n * d * hw.element_bytes + gathered + np_rows * hw.index_bytes,
        bytes_written=n * d * hw.element_bytes,
        flops=sparse,
        variable_bytes=gathered,
    )


def calibrate_pass_count(
    observed_bytes: float,
    n: int,
    d: int,
    pq: int,
    hw: HardwareSpec | None = None,
) -> float:
    """Pass count at which naive selection moves ``observed_bytes`` in total.

    Raises:
        ParameterError: If the observation is below the traffic a single
            index write and the Q/K reads already need
    """
    hw = hw or HardwareSpec()
    _check_dims(n, d, pq)
    np_rows = _pooled_rows(n, pq)
    scores = np_rows * n
    fixed = (np_rows + n) * d * hw.element_bytes + (scores + np_rows) * hw.index_bytes
    per_pass = 2 * scores * hw.element_bytes
    if observed_bytes <= fixed:
        msg = "observed traffic is below the pass-independent minimum"
        raise ParameterError(
            msg,
            parameter="observed_bytes",
            value=observed_bytes,
        )
    return (observed_bytes - fixed) / per_pass


def total_report(reports: Iterable[CostReport]) -> CostTotals:
    """Add reports field by field."""
    totals = CostTotals()
    for r in reports:
        totals = CostTotals(
            phases=[*totals.phases, r.phase],
            bytes_read=totals.bytes_read + r.bytes_read,
            bytes_written=totals.bytes_written + r.bytes_written,
            flops=totals.flops + r.flops,
            variable_bytes=totals.variable_bytes + r.variable_bytes,
        )
    return totals


def report_from_counter(
    counter: TrafficCounter,
    hw: HardwareSpec | None = None,
    *,
    flops: float = 0.0,
) -> CostReport:
    """Selection report from the element counts a selection run recorded."""
    hw = hw or HardwareSpec()
    eb, ib = hw.element_bytes, hw.index_bytes
    map_bytes = (counter.score_writes + counter.score_reads) * eb
    return CostReport(
        phase=CostPhase.SELECTION,
        bytes_read=(counter.query_reads + counter.key_reads + counter.score_reads) * eb,
        bytes_written=counter.score_writes * eb
        + (counter.index_writes + counter.count_writes) * ib,
        flops=flops,
        variable_bytes=map_bytes + counter.index_writes * ib,
    )


def roofline_seconds(report: CostReport | CostTotals, hw: HardwareSpec | None = None) -> float:
    """Time bound of a stage: the slower of moving its bytes and doing its work."""
    hw = hw or HardwareSpec()
    moved = report.bytes_read + report.bytes_written
    return max(moved / hw.memory_bandwidth, report.flops / hw.peak_flops)


class ContextPoint(BaseModel):
    """Modelled selection traffic and attention time at one sequence length."""

    model_config = ConfigDict(frozen=True)

    n: int
    naive_bytes: int = Field(..., description="Total traffic of materialize-then-filter selection")
    tiling_bytes: int = Field(..., description="Total traffic of tile-fused selection")
    traffic_ratio: float = Field(..., description="naive_bytes / tiling_bytes")
    dense_seconds: float = Field(..., description="Roofline time of dense attention")
    sparse_seconds: float = Field(..., description="Roofline time of selection plus sparse")
    speedup: float = Field(..., description="dense_seconds / sparse_seconds")


def context_sweep(
    lengths: Iterable[int],
    d: int,
    pq: int,
    rho: float,
    hw: HardwareSpec | None = None,
    *,
    passes: float = 1.0,
) -> list[ContextPoint]:
    """Cost model evaluated at every sequence length, in input order.

    Selection traffic compares the naive and tiled pipelines; the speedup
    compares dense attention against tiled selection followed by sparse
    attention, each stage bounded by :func:`roofline_seconds`.

    Raises:
        ParameterError: On an empty length list or any invalid size, rho or pass count
    """
    hw = hw or HardwareSpec()
    points = []
    for n in lengths:
        naive = traffic_naive_select(n, d, pq, hw, rho=rho, passes=passes)
        tiled = traffic_tiling_select(n, d, pq, rho, hw, passes=passes)
        sparse = total_report([tiled, traffic_sparse_attention(n, d, pq, rho, hw)])
        dense_s = roofline_seconds(traffic_dense_attention(n, d, hw), hw)
        sparse_s = roofline_seconds(sparse, hw)
        points.append(
            ContextPoint(
                n=n,
                naive_bytes=naive.total_bytes,
                tiling_bytes=tiled.total_bytes,
                traffic_ratio=naive.total_bytes / tiled.total_bytes,
                dense_seconds=dense_s,
                sparse_seconds=sparse_s,
                speedup=dense_s / sparse_s,
            )
        )
    if not points:
        msg = "need at least one sequence length"
        raise ParameterError(msg, parameter="lengths", value=0)
    return points
