"""Important-vector selection.

``tiling_select`` computes pooled-query scores one K-tile group at a time and
filters each tile with minS as soon as it is produced, so only selected
indices leave a group. A per-row running maximum is carried across the tiles
of a group and reset at every group boundary. ``exact_mins_select`` is the
materialize-then-filter reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import structlog

from vecsparse.exceptions import ParameterError, ShapeError
from vecsparse.filters import mean_pool_queries, mins_filter
from vecsparse.tensor import as_matrix, scaled_scores
from vecsparse.types import AttnConfig, SelectionSet, SelectMode, TileGeometry
from vecsparse.utils.parallel import ordered_map

logger = structlog.get_logger(__name__)

Index = npt.NDArray[np.int64]
F64 = npt.NDArray[np.float64]


@dataclass
class TrafficCounter:
    """Element counts moved to and from main memory during selection.

    Counts are in elements, not bytes; ``vecsparse.cost.report_from_counter``
    applies element and index widths.
    """

    query_reads: int = 0
    key_reads: int = 0
    score_writes: int = 0
    score_reads: int = 0
    index_writes: int = 0
    count_writes: int = 0
    groups: int = 0
    tiles: int = 0
    phases: list[str] = field(default_factory=list)

    def merge(self, other: TrafficCounter) -> None:
        """Accumulate another counter into this one."""
        self.query_reads += other.query_reads
        self.key_reads += other.key_reads
        self.score_writes += other.score_writes
        self.score_reads += other.score_reads
        self.index_writes += other.index_writes
        self.count_writes += other.count_writes
        self.groups += other.groups
        self.tiles += other.tiles
        self.phases.extend(other.phases)


def _prepare(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    cfg: AttnConfig,
    pq: int,
    alpha: float,
) -> tuple[F64, F64, Index, int]:
    if alpha < 0:
        msg = "alpha must be >= 0"
        raise ParameterError(msg, parameter="alpha", value=alpha)
    qm, km = as_matrix(q, "Q"), as_matrix(k, "K")
    if qm.shape[1] != km.shape[1]:
        msg = "Q and K must share head_dim"
        raise ShapeError(msg, expected=km.shape[1], actual=qm.shape[1])
    if km.shape[0] != cfg.seq_len or km.shape[1] != cfg.head_dim:
        msg = "K does not match config"
        raise ShapeError(
            msg,
            expected=(cfg.seq_len, cfg.head_dim),
            actual=km.shape,
        )
    if cfg.causal and qm.shape[0] != km.shape[0]:
        msg = "causal selection needs as many queries as keys"
        raise ShapeError(
            msg,
            expected=km.shape[0],
            actual=qm.shape[0],
        )
    qp = mean_pool_queries(qm, pq).astype(np.float64)
    num_queries = qm.shape[0]
    starts = np.arange(qp.shape[0], dtype=np.int64) * pq
    last_rows = np.minimum(starts + pq, num_queries) - 1
    return qp, km.astype(np.float64), last_rows, num_queries


def _mask_future(s: F64, col0: int, last_rows: Index) -> None:
    cols = col0 + np.arange(s.shape[1])
    s[cols[None, :] > last_rows[:, None]] = -np.inf


def tiling_select(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    cfg: AttnConfig,
    geom: TileGeometry,
    alpha: float,
    *,
    mode: SelectMode = SelectMode.ONE_PASS,
    counter: TrafficCounter | None = None,
    threads: int = 1,
) -> SelectionSet:
    """Tile-fused minS selection of important key vectors per query block.

    Args:
        q: Queries (Nq, D)
        k: Keys (N, D)
        cfg: Problem shape and masking
        geom: Pool size, K-tile size and tiles per group
        alpha: minS margin, >= 0
        mode: ONE_PASS filters each tile against the running max after that
            tile; TWO_PASS re-scans the group against its final running max
        counter: Optional traffic accounting sink
        threads: Worker threads over K-tile groups

    Returns:
        Canonical (ascending, deduplicated) selection

    Raises:
        ShapeError: On mismatched operands
        ParameterError: If alpha < 0
    """
    qp, km, last_rows, num_queries = _prepare(q, k, cfg, geom.pq, alpha)
    n = km.shape[0]
    bk = geom.bk
    num_blocks = qp.shape[0]
    group_starts = list(range(0, n, geom.group_width))

    def run_group(g0: int) -> tuple[Index, Index, TrafficCounter]:
        width = min(geom.group_width, n - g0)
        s = scaled_scores(qp, km[g0 : g0 + width], cfg.scale)
        if cfg.causal:
            _mask_future(s, g0, last_rows)
        num_tiles = -(-width // bk)
        padded = np.full((num_blocks, num_tiles * bk), -np.inf)
        padded[:, :width] = s
        tiles = padded.reshape(num_blocks, num_tiles, bk)
        running = np.maximum.accumulate(tiles.max(axis=2), axis=1)
        if mode is SelectMode.ONE_PASS:
            threshold = running[:, :, None] - alpha
        else:
            threshold = running[:, -1][:, None, None] - alpha
        passed = np.isfinite(tiles) & (tiles >= threshold)
        rows, tile_ids, lanes = np.nonzero(passed)
        cols = g0 + tile_ids * bk + lanes
        local = TrafficCounter(
            query_reads=num_blocks * qp.shape[1],
            key_reads=width * km.shape[1],
            index_writes=int(rows.size),
            groups=1,
            tiles=num_tiles,
        )
        return rows.astype(np.int64), cols.astype(np.int64), local

    results = ordered_map(run_group, group_starts, threads)
    rows = np.concatenate([r for r, _, _ in results])
    cols = np.concatenate([c for _, c, _ in results])
    sel = SelectionSet.from_pairs(
        rows,
        cols,
        num_keys=n,
        num_queries=num_queries,
        block_size=geom.pq,
        causal=cfg.causal,
    )
    if counter is not None:
        for _, _, local in results:
            counter.merge(local)
        counter.count_writes += num_blocks
        counter.phases.append("tiling_select")
    logger.debug(
        "tiling select finished",
        blocks=num_blocks,
        groups=len(group_starts),
        selected=int(sel.indices.size),
        mode=mode.value,
    )
    return sel


def exact_mins_select(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    cfg: AttnConfig,
    pq: int,
    alpha: float,
    *,
    counter: TrafficCounter | None = None,
) -> SelectionSet:
    """Materialize the full pooled score map, then minS-filter every row."""
    qp, km, last_rows, num_queries = _prepare(q, k, cfg, pq, alpha)
    s = scaled_scores(qp, km, cfg.scale)
    if cfg.causal:
        _mask_future(s, 0, last_rows)
    blocks = [mins_filter(s[i], alpha, row=i).selected for i in range(s.shape[0])]
    sel = SelectionSet.from_blocks(
        blocks,
        num_keys=km.shape[0],
        num_queries=num_queries,
        block_size=pq,
        causal=cfg.causal,
    )
    if counter is not None:
        counter.merge(
            TrafficCounter(
                query_reads=qp.size,
                key_reads=km.size,
                score_writes=s.size,
                score_reads=s.size,
                index_writes=int(sel.indices.size),
                count_writes=s.shape[0],
            )
        )
        counter.phases.append("exact_mins_select")
    return sel


def selectable_entries(num_queries: int, num_keys: int, causal: bool) -> int:
    """Entries of the full map a mask may select."""
    if causal:
        return num_queries * (num_queries + 1) // 2
    return num_queries * num_keys


def covered_entries(sel: SelectionSet) -> int:
    """Attention-map cells covered by a selection, excluding causally hidden cells."""
    counts = sel.counts
    starts = np.arange(sel.num_blocks, dtype=np.int64) * sel.block_size
    stops = np.minimum(starts + sel.block_size, sel.num_queries)
    if not sel.causal:
        return int(np.sum(counts * (stops - starts)))
    row_start = np.repeat(starts, counts)
    row_stop = np.repeat(stops, counts)
    return int(np.sum(row_stop - np.maximum(row_start, sel.indices)))


def selection_sparsity(sel: SelectionSet, n: int, cfg: AttnConfig) -> float:
    """Fraction of selectable attention entries a selection drops.

    Raises:
        ShapeError: If ``n`` disagrees with the selection's key count
    """
    if n != sel.num_keys:
        msg = "selection built for a different key count"
        raise ShapeError(msg, expected=n, actual=sel.num_keys)
    total = selectable_entries(sel.num_queries, n, cfg.causal)
    return 1.0 - covered_entries(sel) / total


def pad_selection(sel: SelectionSet, pad_value: int | None = None) -> Index:
    """Export as a dense ``(num_blocks, max_count)`` table padded on the right.

    The default pad is ``num_keys``, one past the last valid column.
    """
    pad = sel.num_keys if pad_value is None else pad_value
    counts = sel.counts
    width = int(counts.max()) if counts.size else 0
    table = np.full((sel.num_blocks, width), pad, dtype=np.int64)
    rows = np.repeat(np.arange(sel.num_blocks), counts)
    lanes = np.arange(sel.indices.size) - np.repeat(sel.offsets[:-1], counts)
    table[rows, lanes] = sel.indices
    return table


def strip_padding(
    table: npt.ArrayLike,
    *,
    num_keys: int,
    num_queries: int,
    block_size: int,
    causal: bool = False,
    pad_value: int | None = None,
) -> SelectionSet:
    """Inverse of :func:`pad_selection`."""
    pad = num_keys if pad_value is None else pad_value
    arr = np.asarray(table, dtype=np.int64)
    if arr.ndim != 2:
        msg = "padded table must be 2-D"
        raise ShapeError(msg, expected=2, actual=arr.ndim)
    return SelectionSet.from_blocks(
        [row[row != pad] for row in arr],
        num_keys=num_keys,
        num_queries=num_queries,
        block_size=block_size,
        causal=causal,
    )
