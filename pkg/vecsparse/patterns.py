"""Sparse-pattern analysis on attention maps.

A region family partitions the selectable area of an attention map into
regions of one shape (single entries, square blocks, full columns or
diagonals, column segments, row segments, column strips). Regions are ranked
by mean attention weight and added greedily, which yields a sparsity/recall
curve per family. The module also generates synthetic maps with
column-segment structure and calibrates row filters on pooled maps to a
target sparsity.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from vecsparse.exceptions import InputError, ParameterError, ShapeError
from vecsparse.filters import RowFilter, filter_class, select_rows
from vecsparse.types import FilterKind, FilterSpec
from vecsparse.utils.cache import CacheManager
from vecsparse.utils.parallel import ordered_map

logger = structlog.get_logger(__name__)

F64 = npt.NDArray[np.float64]
Index = npt.NDArray[np.int64]

# Floor added to pooled probabilities before taking logs, so visible columns
# with no mass still carry a finite score.
_LOG_FLOOR = 1e-30

# Bisection steps for continuous filter parameters.
_MAX_BISECT = 60


class RegionKind(str, Enum):
    """Region shape of a pattern family."""

    ORACLE = "oracle"
    BLOCK = "block"
    VLINE = "vline"
    SLINE = "sline"
    LINE_POOL = "line_pool"
    VVEC = "vvec"
    HVEC = "hvec"
    STRIPE = "stripe"


class RegionFamily(BaseModel):
    """Region shape and its size parameters.

    Only the sizes relevant to ``kind`` are used: ``block`` for block and
    stripe (row height), ``vec`` for vvec and hvec, ``stripe_w`` for stripe.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: RegionKind = Field(..., description="Region shape")
    block: int = Field(default=64, ge=1, description="Block edge / stripe height")
    vec: int = Field(default=64, ge=1, description="Vector segment length")
    stripe_w: int = Field(default=1, ge=1, description="Stripe width in columns")

    @property
    def label(self) -> str:
        """Name used in result tables."""
        return self.kind.value

    def sizes(self) -> dict[str, int]:
        """Size parameters that apply to this kind."""
        if self.kind is RegionKind.BLOCK:
            return {"block": self.block}
        if self.kind in (RegionKind.VVEC, RegionKind.HVEC):
            return {"vec": self.vec}
        if self.kind is RegionKind.STRIPE:
            return {"block": self.block, "stripe_w": self.stripe_w}
        return {}


@dataclass(frozen=True)
class RegionPartition:
    """Region labels of every map entry.

    Each layer is an (N, N) array of region ids with -1 on causally hidden
    entries. Partition families have one layer; ``line_pool`` has a vertical
    and a slash layer, so every entry sits in two regions.
    """

    n: int
    causal: bool
    family: RegionFamily
    layers: tuple[Index, ...]
    visible: npt.NDArray[np.bool_]
    sizes: Index

    @property
    def num_regions(self) -> int:
        return int(self.sizes.size)

    @property
    def selectable(self) -> int:
        """Entries a mask may select."""
        return int(self.visible.sum())

    @property
    def is_partition(self) -> bool:
        """True when every selectable entry lies in exactly one region."""
        return len(self.layers) == 1


class PatternMask(BaseModel):
    """A set of selected regions and the entries they cover."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Map dimension N")
    family: RegionFamily
    selected_regions: tuple[int, ...] = Field(default=(), description="Region ids, in order")
    entry_count: int = Field(..., ge=0, description="Covered selectable entries")


class CurvePoint(BaseModel):
    """One point of a sparsity/recall curve."""

    model_config = ConfigDict(frozen=True)

    sparsity: float
    recall: float
    entries: int = Field(..., ge=0, description="Covered entries at this point")


class TradeoffCurve(BaseModel):
    """Sparsity/recall curve of one region family on one map.

    Sparsity strictly decreases and recall never decreases along the curve;
    the last point is (0.0, 1.0).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: RegionFamily
    causal: bool = False
    selectable: int = Field(..., ge=1)
    sparsity: np.ndarray
    recall: np.ndarray
    entries: np.ndarray

    @model_validator(mode="after")
    def check_monotone(self) -> TradeoffCurve:
        """Equal lengths, strictly decreasing sparsity, non-decreasing recall."""
        size = self.sparsity.size
        if size == 0 or self.recall.size != size or self.entries.size != size:
            msg = "curve arrays must be non-empty and of equal length"
            raise InputError(msg)
        if size > 1:
            if not bool(np.all(np.diff(self.sparsity) < 0)):
                msg = "curve sparsity must strictly decrease"
                raise InputError(msg)
            if not bool(np.all(np.diff(self.recall) >= 0)):
                msg = "curve recall must not decrease"
                raise InputError(msg)
        for arr in (self.sparsity, self.recall, self.entries):
            arr.setflags(write=False)
        return self

    def __len__(self) -> int:
        return int(self.sparsity.size)

    @property
    def points(self) -> list[CurvePoint]:
        """Curve as point objects, first point first."""
        return [
            CurvePoint(sparsity=float(s), recall=float(r), entries=int(e))
            for s, r, e in zip(self.sparsity, self.recall, self.entries)
        ]


def _as_square_map(a: npt.ArrayLike) -> F64:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        msg = "attention map must be a non-empty square matrix"
        raise ShapeError(msg, actual=arr.shape)
    if not bool(np.isfinite(arr).all()) or bool((arr < 0).any()):
        msg = "attention map must be finite and non-negative"
        raise InputError(msg)
    return arr


def _raw_ids(kind: RegionKind, family: RegionFamily, r: Index, c: Index, n: int) -> Index:
    if kind is RegionKind.ORACLE:
        return r * n + c
    if kind is RegionKind.BLOCK:
        return (r // family.block) * -(-n // family.block) + c // family.block
    if kind is RegionKind.VLINE:
        return c
    if kind is RegionKind.SLINE:
        return c - r + (n - 1)
    if kind is RegionKind.VVEC:
        return (r // family.vec) * n + c
    if kind is RegionKind.HVEC:
        return r * -(-n // family.vec) + c // family.vec
    if kind is RegionKind.STRIPE:
        return (r // family.block) * -(-n // family.stripe_w) + c // family.stripe_w
    msg = f"no single-layer id scheme for {kind.value}"
    raise ParameterError(msg, parameter="kind", value=kind.value)


def enumerate_regions(n: int, family: RegionFamily, causal: bool = False) -> RegionPartition:
    """Label every selectable entry of an N x N map with its region.

    Ragged edge regions are kept when a size does not divide N. Region ids
    are dense and follow row-major order of the shape's anchor.

    Raises:
        ParameterError: If N < 1 or a size parameter exceeds N
    """
    if n < 1:
        msg = "map dimension must be >= 1"
        raise ParameterError(msg, parameter="n", value=n)
    for name, size in family.sizes().items():
        if size > n:
            msg = f"{name} exceeds map dimension {n}"
            raise ParameterError(msg, parameter=name, value=size)
    r, c = np.indices((n, n), dtype=np.int64)
    visible = c <= r if causal else np.ones((n, n), dtype=bool)
    if family.kind is RegionKind.LINE_POOL:
        raw_layers = [
            _raw_ids(RegionKind.VLINE, family, r, c, n),
            _raw_ids(RegionKind.SLINE, family, r, c, n),
        ]
    else:
        raw_layers = [_raw_ids(family.kind, family, r, c, n)]
    layers = []
    offset = 0
    for raw in raw_layers:
        uniq, inverse = np.unique(raw[visible], return_inverse=True)
        ids = np.full((n, n), -1, dtype=np.int64)
        ids[visible] = inverse.reshape(-1) + offset
        layers.append(ids)
        offset += int(uniq.size)
    sizes = np.bincount(
        np.concatenate([layer[visible] for layer in layers]),
        minlength=offset,
    ).astype(np.int64)
    return RegionPartition(
        n=n,
        causal=causal,
        family=family,
        layers=tuple(layers),
        visible=visible,
        sizes=sizes,
    )


def _region_sums(a: F64, partition: RegionPartition) -> F64:
    if a.shape != (partition.n, partition.n):
        msg = "map does not match partition"
        raise ShapeError(msg, expected=(partition.n,) * 2, actual=a.shape)
    weights = a[partition.visible]
    sums = np.zeros(partition.num_regions)
    for layer in partition.layers:
        ids = layer[partition.visible]
        sums += np.bincount(ids, weights=weights, minlength=partition.num_regions)
    return sums


def region_importance(a: npt.ArrayLike, partition: RegionPartition) -> F64:
    """Mean attention weight of each region over its visible entries."""
    sums = _region_sums(_as_square_map(a), partition)
    out: F64 = sums / partition.sizes
    return out


def mask_entries(partition: RegionPartition, regions: Sequence[int]) -> npt.NDArray[np.bool_]:
    """Boolean (N, N) coverage of a set of regions; overlaps count once.

    Raises:
        ParameterError: If a region id is out of range
    """
    ids = np.asarray(regions, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= partition.num_regions):
        msg = "region id out of range"
        raise ParameterError(msg, parameter="regions", value=int(ids.max()))
    chosen = np.zeros(partition.num_regions, dtype=bool)
    chosen[ids] = True
    covered = np.zeros((partition.n, partition.n), dtype=bool)
    for layer in partition.layers:
        covered |= (layer >= 0) & chosen[np.maximum(layer, 0)]
    return covered


def pattern_mask(partition: RegionPartition, regions: Sequence[int]) -> PatternMask:
    """Mask object for a region selection."""
    covered = mask_entries(partition, regions)
    return PatternMask(
        n=partition.n,
        family=partition.family,
        selected_regions=tuple(int(x) for x in regions),
        entry_count=int(covered.sum()),
    )


def _union_progress(a: F64, partition: RegionPartition, order: Index) -> tuple[Index, F64]:
    positions = []
    labels = []
    for layer in partition.layers:
        flat = layer.reshape(-1)
        pos = np.flatnonzero(flat >= 0)
        positions.append(pos)
        labels.append(flat[pos])
    pos_all = np.concatenate(positions)
    lab_all = np.concatenate(labels)
    by_label = np.argsort(lab_all, kind="stable")
    pos_sorted = pos_all[by_label]
    bounds = np.concatenate([[0], np.cumsum(partition.sizes)])
    flat_a = a.reshape(-1)
    covered = np.zeros(flat_a.size, dtype=bool)
    entries: list[int] = []
    mass: list[float] = []
    count = 0
    total = 0.0
    for region in order:
        pos = pos_sorted[bounds[region] : bounds[region + 1]]
        new = pos[~covered[pos]]
        if new.size == 0:
            continue
        covered[new] = True
        count += int(new.size)
        total += float(flat_a[new].sum())
        entries.append(count)
        mass.append(total)
    return np.asarray(entries, dtype=np.int64), np.asarray(mass)


def _subsample(size: int, max_points: int | None) -> Index:
    if max_points is None or size <= max_points:
        return np.arange(size, dtype=np.int64)
    picks = np.round(np.linspace(0, size - 1, max_points)).astype(np.int64)
    return np.unique(picks)


def tradeoff_curve(
    a: npt.ArrayLike,
    family: RegionFamily,
    causal: bool = False,
    max_points: int | None = None,
) -> TradeoffCurve:
    """Greedy region-by-region sparsity/recall curve.

    Regions are added in descending importance, ties to the lower id. For
    ``line_pool`` an entry already covered by an earlier line is not counted
    again, and lines adding nothing new produce no point.

    Args:
        a: Attention map (N, N)
        family: Region family
        causal: Exclude entries above the diagonal
        max_points: Keep at most this many points, endpoints included

    Raises:
        ParameterError: If ``max_points`` < 2
        InputError: If the map carries no visible mass
    """
    if max_points is not None and max_points < 2:
        msg = "max_points must be >= 2"
        raise ParameterError(msg, parameter="max_points", value=max_points)
    arr = _as_square_map(a)
    partition = enumerate_regions(arr.shape[0], family, causal)
    sums = _region_sums(arr, partition)
    means = sums / partition.sizes
    order = np.lexsort((np.arange(partition.num_regions), -means))
    if partition.is_partition:
        entries = np.cumsum(partition.sizes[order])
        mass = np.cumsum(sums[order])
    else:
        entries, mass = _union_progress(arr, partition, order)
    if not mass[-1] > 0:
        msg = "attention map has no visible mass"
        raise InputError(msg)
    keep = _subsample(entries.size, max_points)
    selectable = partition.selectable
    curve = TradeoffCurve(
        family=family,
        causal=causal,
        selectable=selectable,
        sparsity=1.0 - entries[keep] / selectable,
        recall=mass[keep] / mass[-1],
        entries=entries[keep],
    )
    logger.debug(
        "tradeoff curve",
        family=family.label,
        regions=partition.num_regions,
        points=len(curve),
    )
    return curve


def tradeoff_curves(
    a: npt.ArrayLike,
    families: Sequence[RegionFamily],
    causal: bool = False,
    max_points: int | None = None,
    threads: int = 1,
) -> list[TradeoffCurve]:
    """One curve per family, in the order given."""
    arr = _as_square_map(a)
    return ordered_map(
        lambda fam: tradeoff_curve(arr, fam, causal=causal, max_points=max_points),
        families,
        threads,
    )


def curve_auc(curve: TradeoffCurve) -> float:
    """Trapezoidal area under recall over sparsity on [0, 1].

    A curve not starting at sparsity 1 is anchored at (1.0, 0.0), the empty
    selection.

    Raises:
        ParameterError: If the curve has fewer than two points
    """
    if len(curve) < 2:
        msg = "AUC needs at least two points"
        raise ParameterError(msg, parameter="points", value=len(curve))
    x = curve.sparsity[::-1].astype(np.float64)
    y = curve.recall[::-1].astype(np.float64)
    if x[-1] < 1.0:
        x = np.append(x, 1.0)
        y = np.append(y, 0.0)
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def recall_at_sparsity(curve: TradeoffCurve, sparsity: float) -> float:
    """Best recall among curve points at least as sparse as ``sparsity``; 0 if none."""
    reach = curve.sparsity >= sparsity - 1e-12
    if not bool(reach.any()):
        return 0.0
    return float(curve.recall[reach].max())


class SynthSpec(BaseModel):
    """Structure of a synthetic attention map.

    Rows are grouped into blocks of ``segment_len``; each block gets
    ``segments_per_block`` hot columns, so the hot entries are column
    segments of height ``segment_len``. ``hot_mass`` of every row lands on
    its hot entries; the rest follows the background (uniform noise plus an
    optional sink column and diagonal band).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    segments_per_block: int = Field(default=4, ge=1, description="Hot columns per row block")
    segment_len: int = Field(default=64, ge=1, description="Rows per block (segment height)")
    hot_mass: float = Field(default=0.9, gt=0, le=1, description="Row mass on hot segments")
    noise: float = Field(default=1.0, ge=0, description="Background noise amplitude")
    causal: bool = Field(default=False, description="Zero entries above the diagonal")
    sink: float = Field(default=0.0, ge=0, description="Extra background weight on column 0")
    diag_band: int = Field(default=0, ge=0, description="Half-width of the diagonal band")
    diag_weight: float = Field(default=1.0, ge=0, description="Background weight inside the band")


def _synthesize(n: int, spec: SynthSpec, seed: int) -> tuple[F64, npt.NDArray[np.bool_]]:
    if n < 1:
        msg = "map dimension must be >= 1"
        raise ParameterError(msg, parameter="n", value=n)
    if spec.segment_len > n:
        msg = "segment_len exceeds map dimension"
        raise ParameterError(msg, parameter="segment_len", value=spec.segment_len)
    if not 0 < spec.hot_mass <= 1:
        msg = "hot_mass must lie in (0, 1]"
        raise ParameterError(msg, parameter="hot_mass", value=spec.hot_mass)
    rng = np.random.default_rng(seed)
    hot = np.zeros((n, n), dtype=bool)
    for row0 in range(0, n, spec.segment_len):
        # causal blocks may only use columns every row of the block can see
        candidates = np.arange(row0 + 1) if spec.causal else np.arange(n)
        count = min(spec.segments_per_block, candidates.size)
        cols = rng.choice(candidates, size=count, replace=False)
        hot[row0 : row0 + spec.segment_len, cols] = True
    r, c = np.indices((n, n))
    visible = c <= r if spec.causal else np.ones((n, n), dtype=bool)
    hot_w = np.where(hot, 0.5 + rng.random((n, n)), 0.0)
    bg = spec.noise * rng.random((n, n))
    bg[:, 0] += spec.sink
    if spec.diag_band:
        bg[np.abs(r - c) < spec.diag_band] += spec.diag_weight
    bg = np.where(visible & ~hot, bg, 0.0)
    hot_part = hot_w / hot_w.sum(axis=1, keepdims=True)
    bg_sum = bg.sum(axis=1, keepdims=True)
    has_bg = bg_sum > 0
    mixed = spec.hot_mass * hot_part + (1.0 - spec.hot_mass) * bg / np.where(has_bg, bg_sum, 1.0)
    a = np.where(has_bg, mixed, hot_part)
    a /= a.sum(axis=1, keepdims=True)
    return a, hot


def synth_attention_map(n: int, spec: SynthSpec, seed: int = 0) -> F64:
    """Row-stochastic N x N map with column-segment structure.

    Deterministic for a given ``seed``. Kept in float64 so rows sum to one
    to within rounding.

    Raises:
        ParameterError: If N < 1, ``segment_len`` > N or ``hot_mass`` is
            outside (0, 1]
    """
    a, _ = _synthesize(n, spec, seed)
    return a


def synth_hot_mask(n: int, spec: SynthSpec, seed: int = 0) -> npt.NDArray[np.bool_]:
    """Hot entries of the map :func:`synth_attention_map` builds for the same arguments."""
    _, hot = _synthesize(n, spec, seed)
    return hot


@dataclass(frozen=True)
class PooledView:
    """An attention map pooled over query blocks of height ``pq``.

    ``mass[i, j]`` is the attention mass block ``i`` puts on key ``j`` and
    ``visible[i, j]`` the number of its rows that can see key ``j``.
    ``probs`` normalizes ``mass`` per block and ``scores`` are its logs,
    -inf where no row sees the key.
    """

    pq: int
    causal: bool
    mass: F64
    visible: Index
    probs: F64
    scores: F64

    @property
    def num_blocks(self) -> int:
        return int(self.mass.shape[0])

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def selectable(self) -> int:
        return int(self.visible.sum())

    def stats(self, blocks: Sequence[Index]) -> tuple[float, float]:
        """Sparsity and recall of per-block column selections."""
        counts = [b.size for b in blocks]
        rows = np.repeat(np.arange(len(blocks)), counts)
        cols = np.concatenate(blocks).astype(np.int64) if blocks else np.zeros(0, dtype=np.int64)
        covered = int(self.visible[rows, cols].sum())
        mass = float(self.mass[rows, cols].sum())
        total = self.total_mass
        return 1.0 - covered / self.selectable, (mass / total if total > 0 else 0.0)


_POOLED_CACHE: CacheManager[PooledView] = CacheManager(maxsize=16)


def _digest(arr: F64, pq: int, causal: bool) -> str:
    h = hashlib.sha256(arr.tobytes())
    return f"{h.hexdigest()}:{arr.shape[0]}x{arr.shape[1]}:{pq}:{int(causal)}"


def _build_pooled(arr: F64, pq: int, causal: bool) -> PooledView:
    nq, n = arr.shape
    starts = np.arange(0, nq, pq)
    stops = np.minimum(starts + pq, nq)
    cols = np.arange(n)
    if causal:
        hidden = cols[None, :] > np.arange(nq)[:, None]
        arr = np.where(hidden, 0.0, arr)
        visible = np.clip(stops[:, None] - np.maximum(starts[:, None], cols[None, :]), 0, None)
    else:
        visible = np.broadcast_to((stops - starts)[:, None], (starts.size, n)).copy()
    mass = np.add.reduceat(arr, starts, axis=0)
    row_mass = mass.sum(axis=1, keepdims=True)
    uniform = visible / visible.sum(axis=1, keepdims=True)
    probs = np.where(row_mass > 0, mass / np.where(row_mass > 0, row_mass, 1.0), uniform)
    with np.errstate(divide="ignore"):
        scores = np.where(visible > 0, np.log(probs + _LOG_FLOOR), -np.inf)
    return PooledView(
        pq=pq,
        causal=causal,
        mass=mass,
        visible=visible.astype(np.int64),
        probs=probs,
        scores=scores,
    )


def pooled_view(a: npt.ArrayLike, pq: int, causal: bool = False) -> PooledView:
    """Pool a map over query blocks; memoized by content, ``pq`` and ``causal``.

    Raises:
        ParameterError: If ``pq`` < 1
        ShapeError: If the map is not 2-D, or not square in causal mode
    """
    if pq < 1:
        msg = "pool size must be >= 1"
        raise ParameterError(msg, parameter="pq", value=pq)
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        msg = "attention map must be a non-empty 2-D matrix"
        raise ShapeError(msg, actual=arr.shape)
    if causal and arr.shape[0] != arr.shape[1]:
        msg = "causal map must be square"
        raise ShapeError(msg, actual=arr.shape)
    if not bool(np.isfinite(arr).all()) or bool((arr < 0).any()):
        msg = "attention map must be finite and non-negative"
        raise InputError(msg)
    key = _digest(arr, pq, causal)
    return _POOLED_CACHE.get_or_set(key, lambda: _build_pooled(arr, pq, causal))


def clear_pooled_cache() -> None:
    """Drop memoized pooled views."""
    _POOLED_CACHE.clear()


def evaluate_filter(view: PooledView, filt: RowFilter) -> tuple[float, float]:
    """Sparsity and recall of ``filt`` applied to every pooled row."""
    return view.stats(select_rows(filt, view.scores, view.probs))


class Calibration(BaseModel):
    """Filter parameter found for a sparsity target."""

    model_config = ConfigDict(frozen=True)

    kind: FilterKind
    parameter: float
    sparsity: float
    recall: float
    attained: bool


def calibrate_filter(
    view: PooledView,
    kind: FilterKind,
    target: float,
    tol: float = 0.01,
) -> Calibration:
    """Bisect the filter parameter until sparsity is within ``tol`` of ``target``.

    Larger parameters never select fewer columns, so sparsity falls as the
    parameter grows. When no parameter gets within ``tol``, the closest one
    found is returned with ``attained=False``.
    """
    cls = filter_class(kind)
    lo, hi = cls.bounds(view.scores)
    tried: dict[float, tuple[float, float]] = {}

    def run(x: float) -> tuple[float, float]:
        if x not in tried:
            tried[x] = evaluate_filter(view, cls(x))
        return tried[x]

    sp_lo, _ = run(lo)
    sp_hi, _ = run(hi)
    if abs(sp_lo - target) > tol and abs(sp_hi - target) > tol and sp_hi < target < sp_lo:
        for _ in range(_MAX_BISECT):
            if cls.integral:
                if hi - lo <= 1:
                    break
                mid = float(math.floor((lo + hi) / 2))
            else:
                mid = (lo + hi) / 2
            sp_mid, _ = run(mid)
            if abs(sp_mid - target) <= tol:
                break
            if sp_mid > target:
                lo = mid
            else:
                hi = mid
    param = min(tried, key=lambda x: (abs(tried[x][0] - target), x))
    sparsity, recall = tried[param]
    return Calibration(
        kind=kind,
        parameter=param,
        sparsity=sparsity,
        recall=recall,
        attained=abs(sparsity - target) <= tol,
    )


class HeatmapCell(BaseModel):
    """Recall of one filter calibrated to one sparsity target on one map."""

    model_config = ConfigDict(frozen=True)

    map_id: int = Field(..., ge=0)
    filter: FilterKind
    target_sparsity: float = Field(..., ge=0, le=1)
    achieved_sparsity: float
    recall: float
    attained: bool
    parameter: float


def recall_heatmap(
    maps: Sequence[npt.ArrayLike],
    filters: Sequence[FilterSpec | FilterKind],
    targets: Sequence[float],
    pq: int,
    causal: bool = False,
    tol: float = 0.01,
    threads: int = 1,
) -> list[HeatmapCell]:
    """Calibrate every filter to every target on every map and report recall.

    Only the filter kind is taken from each spec; its parameter is searched.
    Cells come out ordered by map, then filter, then target.

    Raises:
        ParameterError: If a target lies outside [0, 1]
    """
    for t in targets:
        if not 0.0 <= t <= 1.0:
            msg = "sparsity target must lie in [0, 1]"
            raise ParameterError(msg, parameter="target", value=t)
    kinds = [f.kind if isinstance(f, FilterSpec) else FilterKind(f) for f in filters]

    def per_map(map_id: int) -> list[HeatmapCell]:
        view = pooled_view(maps[map_id], pq, causal)
        cells = []
        for kind in kinds:
            for target in targets:
                cal = calibrate_filter(view, kind, target, tol)
                cells.append(
                    HeatmapCell(
                        map_id=map_id,
                        filter=kind,
                        target_sparsity=target,
                        achieved_sparsity=cal.sparsity,
                        recall=cal.recall,
                        attained=cal.attained,
                        parameter=cal.parameter,
                    )
                )
        return cells

    rows = [cell for cells in ordered_map(per_map, range(len(maps)), threads) for cell in cells]
    missed = sum(not cell.attained for cell in rows)
    if missed:
        logger.info("sparsity targets not attained", cells=missed, total=len(rows))
    return rows

