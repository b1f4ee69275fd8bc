"""Per-head minS margin allocation under an average-sparsity budget.

Each head is profiled offline over a grid of margins, recording the sparsity
a margin reaches and the performance it keeps (recall by default). A
knapsack-style dynamic program then picks one sampled margin per head,
maximizing total performance while the heads' average sparsity reaches the
target to within one sparsity bucket.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from vecsparse.exceptions import InfeasibleError, InputError, ParameterError
from vecsparse.filters import MinSFilter
from vecsparse.patterns import evaluate_filter, pooled_view
from vecsparse.utils.parallel import ordered_map

logger = structlog.get_logger(__name__)

# Enumeration size beyond which exhaustive_allocate refuses to run.
MAX_COMBINATIONS = 2_000_000

_EPS = 1e-9


class ProfileSample(BaseModel):
    """Sparsity and performance a head reaches at one margin."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=0, description="minS margin")
    sparsity: float = Field(..., ge=0, le=1, description="Fraction of entries dropped")
    perf: float = Field(..., description="Performance kept, recall by default")


class HeadProfile(BaseModel):
    """Samples of one head, ordered by margin."""

    model_config = ConfigDict(frozen=True)

    head_id: int = Field(default=0, ge=0)
    samples: list[ProfileSample] = Field(..., min_length=2)

    @model_validator(mode="after")
    def check_order(self) -> HeadProfile:
        """Margins ascending and sparsity non-increasing."""
        alphas = [s.alpha for s in self.samples]
        sparsities = [s.sparsity for s in self.samples]
        if any(b < a for a, b in zip(alphas, alphas[1:])):
            msg = "profile samples must be sorted by alpha"
            raise InputError(msg, details={"head": self.head_id})
        if any(b > a + 1e-12 for a, b in zip(sparsities, sparsities[1:])):
            msg = "profile sparsity must not increase with alpha"
            raise InputError(
                msg,
                details={"head": self.head_id},
            )
        return self


class AllocationResult(BaseModel):
    """Chosen margin per head and what the choice achieves."""

    model_config = ConfigDict(frozen=True)

    target_sparsity: float = Field(..., ge=0, le=1)
    per_head_alpha: list[float]
    per_head_sparsity: list[float]
    achieved_avg_sparsity: float
    total_perf: float


def profile_head(
    a: npt.ArrayLike,
    pq: int,
    alpha_grid: Sequence[float],
    *,
    head_id: int = 0,
    causal: bool = False,
) -> HeadProfile:
    """Sample minS on the pooled map of one head at every grid margin.

    The grid is sorted before sampling; performance is recall.

    Raises:
        ParameterError: If the grid has fewer than two margins or a negative one
    """
    grid = sorted(float(x) for x in alpha_grid)
    if len(grid) < 2:
        msg = "alpha grid needs at least two values"
        raise ParameterError(msg, parameter="alpha_grid", value=len(grid))
    if grid[0] < 0:
        msg = "alpha must be >= 0"
        raise ParameterError(msg, parameter="alpha_grid", value=grid[0])
    view = pooled_view(a, pq, causal)
    samples = []
    for alpha in grid:
        sparsity, recall = evaluate_filter(view, MinSFilter(alpha))
        clipped = min(max(sparsity, 0.0), 1.0)
        samples.append(ProfileSample(alpha=alpha, sparsity=clipped, perf=recall))
    return HeadProfile(head_id=head_id, samples=samples)


def profile_heads(
    maps: Sequence[npt.ArrayLike],
    pq: int,
    alpha_grid: Sequence[float],
    *,
    causal: bool = False,
    threads: int = 1,
) -> list[HeadProfile]:
    """Profile every head map; head ids follow input order."""
    return ordered_map(
        lambda h: profile_head(maps[h], pq, alpha_grid, head_id=h, causal=causal),
        range(len(maps)),
        threads,
    )


def _check_request(profiles: Sequence[HeadProfile], target: float) -> None:
    if not profiles:
        msg = "need at least one head profile"
        raise ParameterError(msg, parameter="profiles", value=0)
    if not 0.0 <= target <= 1.0:
        msg = "target sparsity must lie in [0, 1]"
        raise ParameterError(msg, parameter="target_sparsity", value=target)


def _result(
    profiles: Sequence[HeadProfile], picks: Sequence[int], target: float
) -> AllocationResult:
    chosen = [p.samples[j] for p, j in zip(profiles, picks)]
    return AllocationResult(
        target_sparsity=target,
        per_head_alpha=[s.alpha for s in chosen],
        per_head_sparsity=[s.sparsity for s in chosen],
        achieved_avg_sparsity=float(np.mean([s.sparsity for s in chosen])),
        total_perf=float(sum(s.perf for s in chosen)),
    )


def _infeasible(profiles: Sequence[HeadProfile], target: float) -> InfeasibleError:
    best = float(np.mean([max(s.sparsity for s in p.samples) for p in profiles]))
    msg = f"average sparsity {target} is out of reach (best {best:.6f})"
    return InfeasibleError(
        msg,
        target=target,
        best=best,
    )


def dp_allocate(
    profiles: Sequence[HeadProfile],
    target_sparsity: float,
    resolution: int = 101,
) -> AllocationResult:
    """Pick one sampled margin per head maximizing total performance.

    Sparsity is bucketed at ``1 / resolution`` and each sample is charged
    the bucket its sparsity rounds up to, which is the same as rounding the
    remaining requirement down. Every combination whose true average reaches
    the target therefore stays feasible, and a chosen one falls short of it
    by less than one bucket. The table holds, per head count and total
    bucket count, the best performance reachable (-inf where unreachable);
    the answer is the best entry whose bucket total covers the target
    average. Among equal totals the earlier (smaller) margin wins.

    Args:
        profiles: One profile per head
        target_sparsity: Required average sparsity in [0, 1]
        resolution: Buckets per unit sparsity, >= 2

    Raises:
        ParameterError: On an empty profile list, target or resolution
        InfeasibleError: If no combination of samples reaches the target
    """
    _check_request(profiles, target_sparsity)
    if resolution < 2:
        msg = "resolution must be >= 2"
        raise ParameterError(msg, parameter="resolution", value=resolution)
    heads = len(profiles)
    if heads == 1:
        # a single head needs sparsity >= target on its own
        samples = profiles[0].samples
        ok = [j for j, s in enumerate(samples) if s.sparsity >= target_sparsity - _EPS]
        if not ok:
            raise _infeasible(profiles, target_sparsity)
        best = max(ok, key=lambda j: (samples[j].perf, -j))
        return _result(profiles, [best], target_sparsity)

    width = heads * resolution + 1
    table = np.full((heads + 1, width), -np.inf)
    table[0, 0] = 0.0
    back = np.full((heads + 1, width), -1, dtype=np.int64)
    units = [
        np.array([math.ceil(s.sparsity * resolution - _EPS) for s in p.samples], dtype=np.int64)
        for p in profiles
    ]
    for h, profile in enumerate(profiles, start=1):
        prev = table[h - 1]
        for j, sample in enumerate(profile.samples):
            w = int(units[h - 1][j])
            shifted = np.full(width, -np.inf)
            shifted[w:] = prev[: width - w] + sample.perf
            better = shifted > table[h]
            table[h, better] = shifted[better]
            back[h, better] = j

    required = max(0, math.ceil(heads * target_sparsity * resolution - _EPS))
    tail = table[heads, required:]
    if not bool(np.isfinite(tail).any()):
        raise _infeasible(profiles, target_sparsity)
    u = required + int(np.argmax(tail))
    picks = [0] * heads
    for h in range(heads, 0, -1):
        j = int(back[h, u])
        picks[h - 1] = j
        u -= int(units[h - 1][j])
    result = _result(profiles, picks, target_sparsity)
    logger.debug(
        "allocation found",
        heads=heads,
        target=target_sparsity,
        achieved=result.achieved_avg_sparsity,
        total_perf=result.total_perf,
    )
    return result


def exhaustive_allocate(
    profiles: Sequence[HeadProfile], target_sparsity: float
) -> AllocationResult:
    """Brute-force the best combination whose true average sparsity meets the target.

    Ties go to the first combination in lexicographic sample order.

    Raises:
        ParameterError: On an empty profile list, a bad target or too many combinations
        InfeasibleError: If no combination reaches the target
    """
    _check_request(profiles, target_sparsity)
    shape = [len(p.samples) for p in profiles]
    combos = math.prod(shape)
    if combos > MAX_COMBINATIONS:
        msg = "too many combinations to enumerate"
        raise ParameterError(msg, parameter="combinations", value=combos)
    heads = len(profiles)
    sp_total = np.zeros(shape)
    perf_total = np.zeros(shape)
    for h, p in enumerate(profiles):
        axis = [1] * heads
        axis[h] = shape[h]
        sp_total = sp_total + np.array([s.sparsity for s in p.samples]).reshape(axis)
        perf_total = perf_total + np.array([s.perf for s in p.samples]).reshape(axis)
    feasible = sp_total / heads >= target_sparsity - _EPS
    if not bool(feasible.any()):
        raise _infeasible(profiles, target_sparsity)
    flat = int(np.argmax(np.where(feasible, perf_total, -np.inf).reshape(-1)))
    picks = [int(i) for i in np.unravel_index(flat, shape)]
    return _result(profiles, picks, target_sparsity)

