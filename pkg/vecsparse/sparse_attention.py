"""Vector-sparse attention over selected key/value rows.

Each query block of height ``pq`` attends only to the keys its selection
names. ``vector_sparse_attention`` gathers those keys in chunks of ``bk`` and
accumulates with an online softmax; ``direct_sparse_attention`` gathers them
all at once and applies an ordinary softmax.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, Field

from vecsparse.exceptions import DegenerateRowError, ShapeError
from vecsparse.tensor import as_matrix, check_qkv
from vecsparse.types import AttnConfig, Matrix, SelectionSet, TileGeometry

logger = structlog.get_logger(__name__)

F64 = npt.NDArray[np.float64]
Index = npt.NDArray[np.int64]


class OnlineSoftmaxState:
    """Running max, normalizer and unnormalized output for one query block.

    After any number of updates ``acc / ell`` equals the softmax-weighted sum
    of every value row seen so far.
    """

    __slots__ = ("acc", "ell", "m")

    def __init__(self, rows: int, dim: int) -> None:
        self.m: F64 = np.full(rows, -np.inf)
        self.ell: F64 = np.zeros(rows)
        self.acc: F64 = np.zeros((rows, dim))

    def update(self, scores: F64, values: F64) -> None:
        """Fold in one tile of scores (rows x chunk) and its value rows."""
        m_new = np.maximum(self.m, scores.max(axis=1))
        # rows still without a visible key keep a -inf max; shift by 0 instead
        shift = np.where(np.isneginf(m_new), 0.0, m_new)
        p = np.exp(scores - shift[:, None])
        rescale = np.where(np.isneginf(self.m), 0.0, np.exp(self.m - shift))
        self.ell = rescale * self.ell + p.sum(axis=1)
        self.acc = rescale[:, None] * self.acc + p @ values
        self.m = m_new

    def starved(self) -> Index:
        """Rows that have not seen any visible key."""
        return np.flatnonzero(self.ell == 0)

    def finalize(self) -> F64:
        """Normalized output ``diag(ell)^-1 acc``."""
        out: F64 = self.acc / self.ell[:, None]
        return out


def _check_selection(sel: SelectionSet, q: Matrix, k: Matrix, cfg: AttnConfig) -> None:
    if sel.num_keys != k.shape[0]:
        msg = "selection built for a different key count"
        raise ShapeError(msg, expected=k.shape[0], actual=sel.num_keys)
    if sel.num_queries != q.shape[0]:
        msg = "selection built for a different query count"
        raise ShapeError(
            msg,
            expected=q.shape[0],
            actual=sel.num_queries,
        )
    if sel.causal != cfg.causal:
        logger.warning("selection and config disagree on causal masking", selection=sel.causal)


def _block_scores(
    q_block: F64,
    k_rows: F64,
    cols: Index,
    row0: int,
    scale: float,
    causal: bool,
) -> F64:
    s: F64 = q_block @ k_rows.T * scale
    if causal:
        rows = row0 + np.arange(q_block.shape[0])
        s[cols[None, :] > rows[:, None]] = -np.inf
    return s


def _require_keys(sel: SelectionSet, i: int) -> Index:
    cols = sel.block(i)
    if cols.size == 0:
        msg = "query block has an empty selection"
        raise DegenerateRowError(msg, row=sel.block_rows(i)[0])
    return cols


def _diagonal_fallback(
    out: F64,
    starved: Index,
    row0: int,
    v: F64,
) -> None:
    # single visible key: softmax weight 1 on the diagonal
    for r in starved:
        out[r] = v[row0 + int(r)]
    logger.warning(
        "query rows saw no selected key; using their diagonal key",
        rows=[row0 + int(r) for r in starved],
    )


def vector_sparse_attention(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    v: npt.ArrayLike,
    sel: SelectionSet,
    cfg: AttnConfig,
    geom: TileGeometry,
    *,
    permute_chunks: np.random.Generator | None = None,
) -> Matrix:
    """Attention restricted to each block's selected keys, online softmax.

    Args:
        q: Queries (Nq, D)
        k: Keys (N, D)
        v: Values (N, D)
        sel: Selection built with block size ``geom.pq``
        cfg: Problem shape and masking
        geom: ``pq`` is the query block height, ``bk`` the gather chunk
        permute_chunks: Optional generator to visit chunks in random order

    Returns:
        Output (Nq, D) in float32

    Raises:
        ShapeError: On mismatched operands or block size
        DegenerateRowError: If a block selects no key
    """
    qm, km, vm = as_matrix(q, "Q"), as_matrix(k, "K"), as_matrix(v, "V")
    check_qkv(qm, km, vm, cfg)
    _check_selection(sel, qm, km, cfg)
    if sel.block_size != geom.pq:
        msg = "selection block size differs from pq"
        raise ShapeError(msg, expected=geom.pq, actual=sel.block_size)
    q64, k64, v64 = (x.astype(np.float64) for x in (qm, km, vm))
    out = np.empty(q64.shape, dtype=np.float64)
    for i in range(sel.num_blocks):
        cols = _require_keys(sel, i)
        row0, row1 = sel.block_rows(i)
        state = OnlineSoftmaxState(row1 - row0, v64.shape[1])
        chunk_starts = np.arange(0, cols.size, geom.bk)
        if permute_chunks is not None:
            chunk_starts = permute_chunks.permutation(chunk_starts)
        for c0 in chunk_starts:
            # the final chunk may be shorter than bk
            chunk = cols[c0 : c0 + geom.bk]
            s = _block_scores(q64[row0:row1], k64[chunk], chunk, row0, cfg.scale, cfg.causal)
            state.update(s, v64[chunk])
        starved = state.starved()
        if starved.size:
            state.ell[starved] = 1.0
            block_out = state.finalize()
            _diagonal_fallback(block_out, starved, row0, v64)
        else:
            block_out = state.finalize()
        out[row0:row1] = block_out
    return out.astype(np.float32)


def direct_sparse_attention(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    v: npt.ArrayLike,
    sel: SelectionSet,
    cfg: AttnConfig,
) -> Matrix:
    """Reference form: gather every selected key of a block, then softmax."""
    qm, km, vm = as_matrix(q, "Q"), as_matrix(k, "K"), as_matrix(v, "V")
    check_qkv(qm, km, vm, cfg)
    _check_selection(sel, qm, km, cfg)
    q64, k64, v64 = (x.astype(np.float64) for x in (qm, km, vm))
    out = np.empty(q64.shape, dtype=np.float64)
    for i in range(sel.num_blocks):
        cols = _require_keys(sel, i)
        row0, row1 = sel.block_rows(i)
        s = _block_scores(q64[row0:row1], k64[cols], cols, row0, cfg.scale, cfg.causal)
        row_max = s.max(axis=1)
        starved = np.flatnonzero(np.isneginf(row_max))
        row_max[starved] = 0.0
        p = np.exp(s - row_max[:, None])
        denom = p.sum(axis=1)
        denom[starved] = 1.0
        block_out = (p @ v64[cols]) / denom[:, None]
        if starved.size:
            _diagonal_fallback(block_out, starved, row0, v64)
        out[row0:row1] = block_out
    return out.astype(np.float32)


class OutputError(BaseModel):
    """Approximation error of a sparse output against the dense one."""

    model_config = ConfigDict(frozen=True)

    max_abs: float = Field(..., ge=0, description="Largest absolute entry difference")
    mean_abs: float = Field(..., ge=0, description="Mean absolute entry difference")
    rel_fro: float = Field(..., ge=0, description="Relative Frobenius norm of the difference")


def sparse_output_error(o_sparse: npt.ArrayLike, o_dense: npt.ArrayLike) -> OutputError:
    """Entry-wise and Frobenius error of ``o_sparse`` against ``o_dense``.

    When the dense output is all zeros, ``rel_fro`` is the absolute norm.

    Raises:
        ShapeError: If the shapes differ
    """
    a = np.asarray(o_sparse, dtype=np.float64)
    b = np.asarray(o_dense, dtype=np.float64)
    if a.shape != b.shape:
        msg = "outputs differ in shape"
        raise ShapeError(msg, expected=b.shape, actual=a.shape)
    diff = np.abs(a - b)
    ref = float(np.linalg.norm(b))
    err = float(np.linalg.norm(a - b))
    return OutputError(
        max_abs=float(diff.max()) if diff.size else 0.0,
        mean_abs=float(diff.mean()) if diff.size else 0.0,
        rel_fro=err / ref if ref > 0 else err,
    )
