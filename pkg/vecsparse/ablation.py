"""Geometry ablation of tiled selection.

Sweeps the query pool size, K-tile size and tiles per group over one
problem with a fixed minS margin. Each geometry reports how much it
selects, how much more than exact minS on the full pooled map it keeps,
and how far its sparse output drifts from dense attention.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from itertools import product

import numpy.typing as npt
import structlog
from pydantic import BaseModel, ConfigDict, Field

from vecsparse.exceptions import ParameterError
from vecsparse.selection import (
    covered_entries,
    exact_mins_select,
    selection_sparsity,
    tiling_select,
)
from vecsparse.sparse_attention import sparse_output_error, vector_sparse_attention
from vecsparse.tensor import as_matrix, dense_attention
from vecsparse.types import AttnConfig, SelectionSet, SelectMode, TileGeometry
from vecsparse.utils.parallel import ordered_map

logger = structlog.get_logger(__name__)


class GeometryPoint(BaseModel):
    """Outcome of one tile geometry."""

    model_config = ConfigDict(frozen=True)

    pq: int
    bk: int
    gk: int
    mode: SelectMode
    selected: int = Field(..., ge=0, description="Selected key vectors over all blocks")
    sparsity: float = Field(..., description="Sparsity of the tiled selection")
    exact_sparsity: float = Field(..., description="Sparsity of exact minS at the same pq")
    over_selection: float = Field(
        ..., ge=0, description="Covered cells beyond exact minS, relative to exact minS"
    )
    rel_fro: float = Field(..., ge=0, description="Relative Frobenius error against dense")
    max_abs: float = Field(..., ge=0, description="Largest absolute error against dense")


def geometry_grid(
    pq_values: Iterable[int],
    bk_values: Iterable[int],
    gk_values: Iterable[int],
) -> list[TileGeometry]:
    """Every combination of the given sizes, ``pq`` varying slowest.

    Raises:
        ParameterError: If any size list is empty
        pydantic.ValidationError: On a size below 1
    """
    axes = {"pq": list(pq_values), "bk": list(bk_values), "gk": list(gk_values)}
    for name, values in axes.items():
        if not values:
            msg = f"{name} grid is empty"
            raise ParameterError(msg, parameter=name, value=0)
    return [
        TileGeometry(pq=pq, bk=bk, gk=gk)
        for pq, bk, gk in product(axes["pq"], axes["bk"], axes["gk"])
    ]


def geometry_ablation(
    q: npt.ArrayLike,
    k: npt.ArrayLike,
    v: npt.ArrayLike,
    cfg: AttnConfig,
    geometries: Sequence[TileGeometry],
    alpha: float,
    *,
    mode: SelectMode = SelectMode.ONE_PASS,
    threads: int = 1,
) -> list[GeometryPoint]:
    """Run tiled selection and sparse attention once per geometry.

    Results follow the order of ``geometries`` whatever ``threads`` is.

    Raises:
        ParameterError: On an empty geometry list or alpha < 0
        ShapeError: On mismatched operands
    """
    if not geometries:
        msg = "need at least one geometry"
        raise ParameterError(msg, parameter="geometries", value=0)
    qm, km, vm = as_matrix(q, "Q"), as_matrix(k, "K"), as_matrix(v, "V")
    o_dense, _ = dense_attention(qm, km, vm, cfg)
    n = int(km.shape[0])
    exact: dict[int, SelectionSet] = {
        pq: exact_mins_select(qm, km, cfg, pq, alpha) for pq in sorted({g.pq for g in geometries})
    }

    def run(geom: TileGeometry) -> GeometryPoint:
        sel = tiling_select(qm, km, cfg, geom, alpha, mode=mode)
        out = vector_sparse_attention(qm, km, vm, sel, cfg, geom)
        err = sparse_output_error(out, o_dense)
        ref = exact[geom.pq]
        return GeometryPoint(
            pq=geom.pq,
            bk=geom.bk,
            gk=geom.gk,
            mode=mode,
            selected=int(sel.indices.size),
            sparsity=selection_sparsity(sel, n, cfg),
            exact_sparsity=selection_sparsity(ref, n, cfg),
            over_selection=covered_entries(sel) / covered_entries(ref) - 1.0,
            rel_fro=err.rel_fro,
            max_abs=err.max_abs,
        )

    points = ordered_map(run, geometries, threads)
    logger.debug("geometry ablation finished", geometries=len(points), alpha=alpha)
    return points
