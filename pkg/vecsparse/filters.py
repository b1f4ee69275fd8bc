"""Query pooling and row-wise importance filters.

``mins_filter`` keeps every column within ``alpha`` of the row maximum of the
raw (scaled) scores and needs neither sorting nor softmax. ``topk_filter`` and
``topp_filter`` are the sort-based baselines; topP works on probabilities.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
import numpy.typing as npt

from vecsparse.exceptions import DegenerateRowError, InputError, ParameterError, ShapeError
from vecsparse.types import FilterKind, FilterSpec, Matrix, RowMask

F64 = npt.NDArray[np.float64]
Index = npt.NDArray[np.int64]

# Slack when comparing cumulative probability mass against p.
_MASS_TOL = 1e-12


def mean_pool_queries(q: npt.ArrayLike, pq: int) -> Matrix:
    """Mean-pool consecutive query rows into blocks of ``pq``.

    A ragged final block is averaged over its true row count.

    Raises:
        ParameterError: If ``pq`` < 1
        ShapeError: If ``q`` is empty or not 2-D
    """
    if pq < 1:
        msg = "pool size must be >= 1"
        raise ParameterError(msg, parameter="pq", value=pq)
    arr = np.asarray(q)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        msg = "queries must be a non-empty 2-D matrix"
        raise ShapeError(msg, actual=arr.shape)
    if pq == 1:
        return np.ascontiguousarray(arr, dtype=np.float32)
    n = arr.shape[0]
    starts = np.arange(0, n, pq)
    sums = np.add.reduceat(arr.astype(np.float64), starts, axis=0)
    sizes = np.minimum(starts + pq, n) - starts
    return (sums / sizes[:, None]).astype(np.float32)


def _as_row(scores_row: npt.ArrayLike) -> F64:
    row = np.asarray(scores_row, dtype=np.float64)
    if row.ndim != 1:
        msg = "expected a score vector"
        raise ShapeError(msg, expected=1, actual=row.ndim)
    if bool(np.isnan(row).any()) or bool(np.isposinf(row).any()):
        msg = "scores must be finite or -inf"
        raise InputError(msg)
    return row


def mins_filter(scores_row: npt.ArrayLike, alpha: float, *, row: int = 0) -> RowMask:
    """Keep ``{j : s_j >= max(s) - alpha}``; -inf entries are never kept.

    Raises:
        ParameterError: If ``alpha`` < 0
        DegenerateRowError: If the row has no finite entry
    """
    if alpha < 0:
        msg = "alpha must be >= 0"
        raise ParameterError(msg, parameter="alpha", value=alpha)
    s = _as_row(scores_row)
    finite = np.isfinite(s)
    if not bool(finite.any()):
        msg = "row has no finite score"
        raise DegenerateRowError(msg, row=row)
    threshold = s[finite].max() - alpha
    keep = np.flatnonzero(finite & (s >= threshold))
    return RowMask(row=row, width=s.size, selected=keep)


def topk_filter(scores_row: npt.ArrayLike, k: int, *, row: int = 0) -> RowMask:
    """Keep the ``k`` largest finite entries; ties go to the lower column.

    Raises:
        ParameterError: If ``k`` < 1 or exceeds the finite entry count
    """
    s = _as_row(scores_row)
    finite_count = int(np.isfinite(s).sum())
    if k < 1 or k > finite_count:
        msg = f"k must lie in [1, {finite_count}]"
        raise ParameterError(
            msg,
            parameter="k",
            value=k,
        )
    order = np.argsort(-s, kind="stable")
    return RowMask(row=row, width=s.size, selected=np.sort(order[:k]))


def topp_filter(probs_row: npt.ArrayLike, p: float, *, row: int = 0) -> RowMask:
    """Smallest descending-probability prefix whose mass reaches ``p``.

    With ``p == 1`` every column of nonzero probability is kept.

    Raises:
        ParameterError: If ``p`` is outside (0, 1]
        InputError: If the row is not a probability vector
    """
    if not 0 < p <= 1:
        msg = "p must lie in (0, 1]"
        raise ParameterError(msg, parameter="p", value=p)
    probs = np.asarray(probs_row, dtype=np.float64)
    if probs.ndim != 1:
        msg = "expected a probability vector"
        raise ShapeError(msg, expected=1, actual=probs.ndim)
    if not bool(np.isfinite(probs).all()) or bool((probs < 0).any()):
        msg = "probabilities must be finite and non-negative"
        raise InputError(msg)
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-6:
        msg = "probability row must sum to 1"
        raise InputError(msg, details={"sum": total})
    if p >= 1.0:
        return RowMask(row=row, width=probs.size, selected=np.flatnonzero(probs > 0))
    order = np.argsort(-probs, kind="stable")
    cum = np.cumsum(probs[order])
    reached = np.flatnonzero(cum >= p - _MASS_TOL)
    count = int(reached[0]) + 1 if reached.size else int((probs > 0).sum())
    return RowMask(row=row, width=probs.size, selected=np.sort(order[:count]))


def row_filter_stats(
    mask: RowMask,
    row_width: int,
    attn_row: npt.ArrayLike,
) -> tuple[float, float]:
    """Sparsity and recall of one filtered row.

    Args:
        mask: Filter output
        row_width: Number of selectable (unmasked) columns in the row
        attn_row: Post-softmax attention row

    Returns:
        ``(sparsity, recall)`` with sparsity as a fraction in [0, 1]
    """
    a = np.asarray(attn_row, dtype=np.float64)
    if a.ndim != 1 or mask.width != a.size:
        msg = "mask and attention row widths differ"
        raise ShapeError(msg, expected=a.size, actual=mask.width)
    if row_width < 1 or row_width > a.size:
        msg = "row_width out of range"
        raise ShapeError(msg, expected=a.size, actual=row_width)
    total = float(a.sum())
    sparsity = 1.0 - mask.count / row_width
    recall = float(a[mask.selected].sum()) / total if total > 0 else 0.0
    return sparsity, recall


class RowFilter(ABC):
    """A filter bound to one parameter value.

    Parameters are ordered so that a larger value never selects fewer
    columns; calibration relies on that monotonicity.
    """

    kind: FilterKind
    integral: bool = False

    def __init__(self, value: float) -> None:
        """Initialize filter.

        Args:
            value: Filter parameter (alpha, k or p)
        """
        self.value = value

    @abstractmethod
    def select(self, scores_row: F64, probs_row: F64, row: int = 0) -> Index:
        """Selected columns of one row given its scores and probabilities."""

    @classmethod
    @abstractmethod
    def bounds(cls, scores: F64) -> tuple[float, float]:
        """Parameter range spanning maximal to minimal sparsity for these rows."""

    def spec(self) -> FilterSpec:
        """Equivalent serializable spec."""
        if self.kind is FilterKind.MINS:
            return FilterSpec(kind=self.kind, alpha=self.value)
        if self.kind is FilterKind.TOPK:
            return FilterSpec(kind=self.kind, k=max(1, int(self.value)))
        return FilterSpec(kind=self.kind, p=self.value)


class MinSFilter(RowFilter):
    """Threshold filter on raw scores."""

    kind = FilterKind.MINS

    def select(self, scores_row: F64, probs_row: F64, row: int = 0) -> Index:  # noqa: ARG002
        return mins_filter(scores_row, self.value, row=row).selected

    @classmethod
    def bounds(cls, scores: F64) -> tuple[float, float]:
        finite = np.where(np.isfinite(scores), scores, np.nan)
        spread = np.nanmax(finite, axis=1) - np.nanmin(finite, axis=1)
        return 0.0, float(np.nanmax(spread)) + 1.0


class TopKFilter(RowFilter):
    """Fixed-cardinality filter; ``k`` is clamped to each row's finite count."""

    kind = FilterKind.TOPK
    integral = True

    def select(self, scores_row: F64, probs_row: F64, row: int = 0) -> Index:  # noqa: ARG002
        finite = int(np.isfinite(scores_row).sum())
        k = max(1, min(int(self.value), finite))
        return topk_filter(scores_row, k, row=row).selected

    @classmethod
    def bounds(cls, scores: F64) -> tuple[float, float]:
        return 1.0, float(np.isfinite(scores).sum(axis=1).max())


class TopPFilter(RowFilter):
    """Cumulative-mass filter on probabilities."""

    kind = FilterKind.TOPP

    def select(self, scores_row: F64, probs_row: F64, row: int = 0) -> Index:  # noqa: ARG002
        return topp_filter(probs_row, self.value, row=row).selected

    @classmethod
    def bounds(cls, scores: F64) -> tuple[float, float]:  # noqa: ARG003
        return 1e-9, 1.0


_FILTERS: dict[FilterKind, type[RowFilter]] = {
    FilterKind.MINS: MinSFilter,
    FilterKind.TOPK: TopKFilter,
    FilterKind.TOPP: TopPFilter,
}


def filter_class(kind: FilterKind) -> type[RowFilter]:
    """Filter implementation for a kind."""
    return _FILTERS[kind]


def make_filter(spec: FilterSpec) -> RowFilter:
    """Instantiate the filter described by ``spec``."""
    return filter_class(spec.kind)(spec.parameter)


def select_rows(filt: RowFilter, scores: F64, probs: F64) -> list[Index]:
    """Apply ``filt`` to every row of a pooled score/probability pair."""
    return [filt.select(scores[i], probs[i], row=i) for i in range(scores.shape[0])]
