"""Result serialization.

CSV columns are fixed per result kind. JSON records carry the same field
names plus a few extras: the calibrated parameter and ``attained`` flag of
heatmap cells, ``variable_bytes`` of cost reports and ``max_abs`` of
ablation points. All output is UTF-8 with a trailing newline and is a pure
function of its input, so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence
from enum import Enum
from pathlib import Path
from typing import Any, Union

from pydantic import BaseModel

from vecsparse.ablation import GeometryPoint
from vecsparse.allocation import AllocationResult
from vecsparse.config import OutputFormat
from vecsparse.cost import ContextPoint, CostReport
from vecsparse.exceptions import InputError
from vecsparse.patterns import HeatmapCell, TradeoffCurve


class ResultKind(str, Enum):
    """Shape of a result table."""

    CURVES = "curves"
    HEATMAP = "heatmap"
    COST = "cost"
    ALLOCATION = "allocation"
    ABLATION = "ablation"
    CONTEXT = "context"
    SUMMARY = "summary"


COLUMNS: dict[ResultKind, tuple[str, ...]] = {
    ResultKind.CURVES: ("family", "sparsity", "recall"),
    ResultKind.HEATMAP: ("map_id", "filter", "target_sparsity", "achieved_sparsity", "recall"),
    ResultKind.COST: ("phase", "bytes_read", "bytes_written", "flops"),
    ResultKind.ALLOCATION: ("head", "alpha", "sparsity"),
    ResultKind.ABLATION: (
        "pq", "bk", "gk", "mode", "selected", "sparsity", "exact_sparsity",
        "over_selection", "rel_fro",
    ),  # fmt: skip
    ResultKind.CONTEXT: (
        "n", "naive_bytes", "tiling_bytes", "traffic_ratio",
        "dense_seconds", "sparse_seconds", "speedup",
    ),  # fmt: skip
}

Results = Union[
    Sequence[TradeoffCurve],
    Sequence[HeatmapCell],
    Sequence[CostReport],
    Sequence[GeometryPoint],
    Sequence[ContextPoint],
    AllocationResult,
    Sequence[dict[str, Any]],
]


def _curve_rows(curves: Sequence[TradeoffCurve]) -> list[dict[str, Any]]:
    return [
        {"family": c.family.label, "sparsity": float(s), "recall": float(r)}
        for c in curves
        for s, r in zip(c.sparsity, c.recall)
    ]


def _heatmap_rows(cells: Sequence[HeatmapCell], extended: bool) -> list[dict[str, Any]]:
    rows = []
    for cell in cells:
        row: dict[str, Any] = {
            "map_id": cell.map_id,
            "filter": cell.filter.value,
            "target_sparsity": cell.target_sparsity,
            "achieved_sparsity": cell.achieved_sparsity,
            "recall": cell.recall,
        }
        if extended:
            row["attained"] = cell.attained
            row["parameter"] = cell.parameter
        rows.append(row)
    return rows


def _cost_rows(reports: Sequence[CostReport], extended: bool) -> list[dict[str, Any]]:
    rows = []
    for r in reports:
        row: dict[str, Any] = {
            "phase": r.phase.value,
            "bytes_read": r.bytes_read,
            "bytes_written": r.bytes_written,
            "flops": r.flops,
        }
        if extended:
            row["variable_bytes"] = r.variable_bytes
        rows.append(row)
    return rows


def _model_rows(
    kind: ResultKind, items: Sequence[BaseModel], extended: bool
) -> list[dict[str, Any]]:
    rows = [item.model_dump(mode="json") for item in items]
    if extended:
        return rows
    return [{c: row[c] for c in COLUMNS[kind]} for row in rows]


def _allocation_rows(result: AllocationResult) -> list[dict[str, Any]]:
    return [
        {"head": h, "alpha": a, "sparsity": s}
        for h, (a, s) in enumerate(zip(result.per_head_alpha, result.per_head_sparsity))
    ]


def result_rows(
    kind: ResultKind, results: Results, *, extended: bool = False
) -> list[dict[str, Any]]:
    """Flatten results into records; ``extended`` adds the JSON-only fields."""
    if kind is ResultKind.CURVES:
        return _curve_rows(results)  # type: ignore[arg-type]
    if kind is ResultKind.HEATMAP:
        return _heatmap_rows(results, extended)  # type: ignore[arg-type]
    if kind is ResultKind.COST:
        return _cost_rows(results, extended)  # type: ignore[arg-type]
    if kind in (ResultKind.ABLATION, ResultKind.CONTEXT):
        return _model_rows(kind, results, extended)  # type: ignore[arg-type]
    if kind is ResultKind.ALLOCATION:
        if not isinstance(results, AllocationResult):
            msg = "allocation output needs an AllocationResult"
            raise InputError(msg)
        return _allocation_rows(results)
    return [dict(r) for r in results]  # type: ignore[arg-type]


def _to_csv(kind: ResultKind, rows: list[dict[str, Any]]) -> str:
    columns = COLUMNS.get(kind) or (tuple(rows[0]) if rows else ())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def render_results(kind: ResultKind, results: Results, fmt: OutputFormat) -> str:
    """Serialize results to CSV or JSON text."""
    if fmt is OutputFormat.CSV:
        return _to_csv(kind, result_rows(kind, results))
    if kind is ResultKind.ALLOCATION and isinstance(results, AllocationResult):
        payload: Any = results.model_dump(mode="json")
    else:
        payload = result_rows(kind, results, extended=True)
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def emit_results(
    kind: ResultKind,
    results: Results,
    fmt: OutputFormat = OutputFormat.CSV,
    path: str | Path | None = None,
) -> str:
    """Serialize results and write them to ``path`` when given.

    Returns:
        The serialized text

    Raises:
        OSError: If ``path`` cannot be written
    """
    text = render_results(kind, results, fmt)
    if path is not None:
        Path(path).write_bytes(text.encode("utf-8"))
    return text
