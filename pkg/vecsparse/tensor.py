"""Dense numeric core: validation, stable softmax, causal masking and the
dense attention oracle every sparse path is checked against.

Stored results are float32; everything is accumulated in float64.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt
import structlog

from vecsparse.exceptions import DegenerateRowError, InputError, ShapeError
from vecsparse.types import AttnConfig, Matrix

logger = structlog.get_logger(__name__)

F64 = npt.NDArray[np.float64]


def as_matrix(x: npt.ArrayLike, name: str = "matrix") -> Matrix:
    """Validate a 2-D, non-empty, finite array and store it as float32.

    Args:
        x: Array-like input
        name: Operand name used in error messages

    Returns:
        C-contiguous float32 matrix

    Raises:
        ShapeError: If the input is not 2-D or has a zero dimension
        InputError: If any entry is NaN or infinite
    """
    arr = np.asarray(x)
    if arr.ndim != 2:
        msg = f"{name} must be 2-D"
        raise ShapeError(msg, expected=2, actual=arr.ndim)
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        msg = f"{name} must be non-empty"
        raise ShapeError(msg, actual=arr.shape)
    out = np.ascontiguousarray(arr, dtype=np.float32)
    if not bool(np.isfinite(out).all()):
        msg = f"{name} contains non-finite values"
        raise InputError(msg)
    return out


def check_qkv(q: Matrix, k: Matrix, v: Matrix, cfg: AttnConfig) -> None:
    if q.shape[1] != k.shape[1] or k.shape[1] != v.shape[1]:
        msg = "Q, K and V must share head_dim"
        raise ShapeError(
            msg,
            expected=cfg.head_dim,
            actual=(q.shape[1], k.shape[1], v.shape[1]),
        )
    if q.shape[1] != cfg.head_dim:
        msg = "head_dim does not match config"
        raise ShapeError(msg, expected=cfg.head_dim, actual=q.shape[1])
    if k.shape[0] != v.shape[0]:
        msg = "K and V row counts differ"
        raise ShapeError(msg, expected=k.shape[0], actual=v.shape[0])
    if k.shape[0] != cfg.seq_len:
        msg = "key count does not match config"
        raise ShapeError(msg, expected=cfg.seq_len, actual=k.shape[0])
    if cfg.causal and q.shape[0] != k.shape[0]:
        msg = "causal attention needs as many queries as keys"
        raise ShapeError(
            msg,
            expected=k.shape[0],
            actual=q.shape[0],
        )


def apply_causal_mask(s: npt.ArrayLike) -> F64:
    """Set entries above the diagonal to -inf.

    Raises:
        ShapeError: If ``s`` is not square
    """
    arr = np.array(s, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        msg = "causal mask needs a square matrix"
        raise ShapeError(msg, actual=arr.shape)
    arr[np.triu_indices(arr.shape[0], k=1)] = -np.inf
    return arr


def row_softmax(s: npt.ArrayLike) -> F64:
    """Numerically stable softmax over each row.

    -inf entries are allowed as masks and map to exactly zero.

    Raises:
        InputError: If ``s`` contains NaN or +inf
        DegenerateRowError: If a row is entirely -inf
    """
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if bool(np.isnan(arr).any()) or bool(np.isposinf(arr).any()):
        msg = "scores must be finite or -inf"
        raise InputError(msg)
    row_max = arr.max(axis=1, keepdims=True)
    dead = np.flatnonzero(np.isneginf(row_max[:, 0]))
    if dead.size:
        msg = "row has no finite score"
        raise DegenerateRowError(msg, row=int(dead[0]))
    e = np.exp(arr - row_max)
    out: F64 = e / e.sum(axis=1, keepdims=True)
    return out


def scaled_scores(q: npt.ArrayLike, k: npt.ArrayLike, scale: float) -> F64:
    """Scores ``q @ k.T * scale`` in float64."""
    out: F64 = np.asarray(q, dtype=np.float64) @ np.asarray(k, dtype=np.float64).T * scale
    return out


def dense_attention(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    v: npt.ArrayLike,
    cfg: AttnConfig,
) -> tuple[Matrix, Matrix]:
    """Exact attention ``O = softmax(Q K^T * scale) V``.

    Args:
        q: Queries, shape (Nq, D)
        k: Keys, shape (N, D)
        v: Values, shape (N, D)
        cfg: Problem shape and masking

    Returns:
        Tuple of output O (Nq, D) and attention map A (Nq, N), both float32

    Raises:
        ShapeError: On empty or mismatched operands
    """
    qm, km, vm = as_matrix(q, "Q"), as_matrix(k, "K"), as_matrix(v, "V")
    check_qkv(qm, km, vm, cfg)
    s = scaled_scores(qm, km, cfg.scale)
    if cfg.causal:
        s = apply_causal_mask(s)
    a = row_softmax(s)
    o = a @ vm.astype(np.float64)
    logger.debug("dense attention", queries=qm.shape[0], keys=km.shape[0], causal=cfg.causal)
    return o.astype(np.float32), a.astype(np.float32)

