"""Command-line driver.

Usage::

    vecsparse attend  --n 256 --d 32 --pq 64 --alpha 1e9 --seed 7
    vecsparse select  --in qkv.vat --pq 64 --alpha 2 --format json
    vecsparse curves  --in map.vat --family vvec:64 --family block:64
    vecsparse heatmap --target-sparsity 0.5 --target-sparsity 0.75
    vecsparse dp      --heads 3 --target-sparsity 0.6 --profiles profiles.json
    vecsparse cost    --n 65536 --d 128 --pq 64 --rho 0.9 --method naive
    vecsparse synth   --kind map --n 256 --out map.vat
    vecsparse ablate  --n 512 --pq-grid 16,32,64 --gk-grid 1,4,16 --alpha 2
    vecsparse context --lengths 4096,16384,65536 --d 128 --pq 64 --rho 0.9

Results go to ``--out`` or stdout, logs to stderr. Exit status is 0 on
success, 1 for bad input or usage and 2 when the computation is infeasible
or degenerate.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Callable, NoReturn

import numpy as np
import numpy.typing as npt
import structlog
from pydantic import ValidationError

from vecsparse import __version__
from vecsparse.ablation import geometry_ablation, geometry_grid
from vecsparse.allocation import (
    MAX_COMBINATIONS,
    dp_allocate,
    exhaustive_allocate,
    profile_heads,
)
from vecsparse.config import (
    ExperimentConfig,
    OutputFormat,
    Task,
    build_config,
    load_config_file,
    parse_family,
)
from vecsparse.cost import (
    context_sweep,
    traffic_dense_attention,
    traffic_naive_select,
    traffic_sparse_attention,
    traffic_tiling_select,
)
from vecsparse.exceptions import (
    ConfigurationError,
    DegenerateRowError,
    InfeasibleError,
    VecSparseError,
)
from vecsparse.patterns import (
    RegionFamily,
    curve_auc,
    recall_heatmap,
    synth_attention_map,
    tradeoff_curves,
)
from vecsparse.results import ResultKind, Results, emit_results
from vecsparse.selection import TrafficCounter, selection_sparsity, tiling_select
from vecsparse.sparse_attention import sparse_output_error, vector_sparse_attention
from vecsparse.tensor import dense_attention
from vecsparse.tensor_io import load_profiles, load_qkv, load_stack, save_tensor
from vecsparse.types import AttnConfig, FilterKind, Matrix, SelectMode
from vecsparse.utils.logging import LogContext, configure_logging

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2


class UsageError(ConfigurationError):
    """Command line could not be parsed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        msg = f"{self.prog}: {message}"
        raise UsageError(msg)


# ============================================================================
# Inputs
# ============================================================================


def random_qkv(n: int, d: int, seed: int) -> tuple[Matrix, Matrix, Matrix]:
    """Standard-normal Q, K and V drawn from one seeded generator."""
    rng = np.random.default_rng(seed)
    stack = rng.standard_normal((3, n, d)).astype(np.float32)
    return stack[0], stack[1], stack[2]


def _qkv(cfg: ExperimentConfig) -> tuple[Matrix, Matrix, Matrix]:
    if cfg.inputs:
        return load_qkv(cfg.inputs[0])
    return random_qkv(cfg.n, cfg.d, cfg.seed)


def _maps(cfg: ExperimentConfig) -> list[npt.NDArray[Any]]:
    """Attention maps from every input file (each head separately) or synthesized."""
    if cfg.inputs:
        return [head for path in cfg.inputs for head in load_stack(path)]
    spec = cfg.synth.model_copy(update={"causal": cfg.causal or cfg.synth.causal})
    return [synth_attention_map(cfg.n, spec, cfg.seed + h) for h in range(cfg.heads)]


# ============================================================================
# Tasks
# ============================================================================


def run_attend(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Tiled selection, vector-sparse attention and its error against dense."""
    q, k, v = _qkv(cfg)
    attn = AttnConfig.for_inputs(q, k, causal=cfg.causal)
    sel = tiling_select(
        q, k, attn, cfg.geometry, cfg.filter.alpha, mode=cfg.mode, threads=cfg.threads
    )
    o_sparse = vector_sparse_attention(q, k, v, sel, attn, cfg.geometry)
    o_dense, _ = dense_attention(q, k, v, attn)
    err = sparse_output_error(o_sparse, o_dense)
    row = {
        "n": int(k.shape[0]),
        "d": int(k.shape[1]),
        "pq": cfg.geometry.pq,
        "alpha": cfg.filter.alpha,
        "selected": int(sel.indices.size),
        "sparsity": selection_sparsity(sel, int(k.shape[0]), attn),
        **err.model_dump(),
    }
    return ResultKind.SUMMARY, [row]


def run_select(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Tiled selection; one row per query block."""
    q, k, _ = _qkv(cfg)
    attn = AttnConfig.for_inputs(q, k, causal=cfg.causal)
    counter = TrafficCounter()
    sel = tiling_select(
        q,
        k,
        attn,
        cfg.geometry,
        cfg.filter.alpha,
        mode=cfg.mode,
        counter=counter,
        threads=cfg.threads,
    )
    logger.info(
        "selection done",
        sparsity=selection_sparsity(sel, int(k.shape[0]), attn),
        index_writes=counter.index_writes,
    )
    rows = [
        {
            "block": i,
            "count": int(sel.block(i).size),
            "indices": " ".join(str(int(x)) for x in sel.block(i)),
        }
        for i in range(sel.num_blocks)
    ]
    return ResultKind.SUMMARY, rows


def run_curves(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Sparsity/recall curve of every family on the first map."""
    maps = _maps(cfg)
    if len(maps) > 1:
        logger.warning("curves uses the first map only", maps=len(maps))
    curves = tradeoff_curves(
        maps[0],
        cfg.families,
        causal=cfg.causal,
        max_points=cfg.max_points,
        threads=cfg.threads,
    )
    for curve in curves:
        if len(curve) >= 2:
            logger.info("curve", family=curve.family.label, points=len(curve), auc=curve_auc(curve))
    return ResultKind.CURVES, curves


def run_heatmap(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Filter recall at calibrated sparsity targets on every map."""
    cells = recall_heatmap(
        _maps(cfg),
        cfg.filters,
        cfg.target_sparsity,
        cfg.geometry.pq,
        causal=cfg.causal,
        threads=cfg.threads,
    )
    return ResultKind.HEATMAP, cells


def run_dp(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Per-head margin allocation for the first target sparsity."""
    if cfg.profiles:
        profiles = load_profiles(cfg.profiles)
        if "heads" in cfg.model_fields_set:
            if cfg.heads > len(profiles):
                msg = f"--heads {cfg.heads} but {cfg.profiles} holds {len(profiles)} profiles"
                raise ConfigurationError(msg)
            profiles = profiles[: cfg.heads]
    else:
        profiles = profile_heads(
            _maps(cfg),
            cfg.geometry.pq,
            cfg.alpha_grid,
            causal=cfg.causal,
            threads=cfg.threads,
        )
    target = cfg.target_sparsity[0]
    result = dp_allocate(profiles, target, cfg.resolution)
    combos = math.prod(len(p.samples) for p in profiles)
    if combos <= MAX_COMBINATIONS:
        best = exhaustive_allocate(profiles, target)
        logger.info("exhaustive check", dp_perf=result.total_perf, exhaustive_perf=best.total_perf)
    return ResultKind.ALLOCATION, result


def run_cost(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Selection, sparse attention and dense attention reports."""
    n, d, pq, hw = cfg.n, cfg.d, cfg.geometry.pq, cfg.hardware
    if cfg.method == "naive":
        selection = traffic_naive_select(n, d, pq, hw, rho=cfg.rho, passes=cfg.passes)
    else:
        selection = traffic_tiling_select(n, d, pq, cfg.rho, hw, passes=cfg.passes)
    reports = [
        selection,
        traffic_sparse_attention(n, d, pq, cfg.rho, hw),
        traffic_dense_attention(n, d, hw),
    ]
    return ResultKind.COST, reports


def run_synth(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Write synthetic maps or a Q/K/V stack as a TensorFile."""
    if not cfg.output:
        msg = "synth writes a TensorFile and needs --out"
        raise ConfigurationError(msg)
    if cfg.kind == "qkv":
        tensor: npt.NDArray[Any] = np.stack(random_qkv(cfg.n, cfg.d, cfg.seed))
    else:
        maps = _maps(cfg)
        tensor = maps[0] if len(maps) == 1 else np.stack(maps)
    save_tensor(cfg.output, tensor)
    logger.info("tensor written", path=cfg.output, shape=list(tensor.shape))
    return ResultKind.SUMMARY, []


def run_ablate(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Tiled selection and sparse attention over a grid of tile geometries."""
    q, k, v = _qkv(cfg)
    attn = AttnConfig.for_inputs(q, k, causal=cfg.causal)
    geometries = geometry_grid(
        cfg.pq_grid or [cfg.geometry.pq],
        cfg.bk_grid or [cfg.geometry.bk],
        cfg.gk_grid or [cfg.geometry.gk],
    )
    points = geometry_ablation(
        q, k, v, attn, geometries, cfg.filter.alpha, mode=cfg.mode, threads=cfg.threads
    )
    return ResultKind.ABLATION, points


def run_context(cfg: ExperimentConfig) -> tuple[ResultKind, Results]:
    """Cost model across sequence lengths."""
    points = context_sweep(
        cfg.lengths, cfg.d, cfg.geometry.pq, cfg.rho, cfg.hardware, passes=cfg.passes
    )
    for p in points:
        logger.info("context point", n=p.n, traffic_ratio=p.traffic_ratio, speedup=p.speedup)
    return ResultKind.CONTEXT, points


TASKS: dict[Task, Callable[[ExperimentConfig], tuple[ResultKind, Results]]] = {
    Task.ATTEND: run_attend,
    Task.SELECT: run_select,
    Task.CURVES: run_curves,
    Task.HEATMAP: run_heatmap,
    Task.DP: run_dp,
    Task.COST: run_cost,
    Task.SYNTH: run_synth,
    Task.ABLATE: run_ablate,
    Task.CONTEXT: run_context,
}


# ============================================================================
# Parsing
# ============================================================================


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        msg = f"expected comma-separated numbers, got {text!r}"
        raise argparse.ArgumentTypeError(msg) from e


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        msg = f"expected comma-separated integers, got {text!r}"
        raise argparse.ArgumentTypeError(msg) from e


def _family(text: str) -> RegionFamily:
    try:
        return parse_family(text)
    except ConfigurationError as e:
        raise argparse.ArgumentTypeError(e.message) from e


def _common_parser() -> argparse.ArgumentParser:
    p = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("common")
    g.add_argument("--config", help="JSON experiment config; flags override it")
    g.add_argument("--n", type=int, help="sequence length for synthetic inputs")
    g.add_argument("--d", type=int, help="head dimension for synthetic inputs")
    g.add_argument("--pq", type=int, help="query pool size / vector height")
    g.add_argument("--bk", type=int, help="K-tile size")
    g.add_argument("--gk", type=int, help="K-tiles per group")
    g.add_argument("--alpha", type=float, help="minS margin")
    g.add_argument("--mode", choices=[m.value for m in SelectMode], help="tiled selection mode")
    g.add_argument("--causal", action="store_true", help="causal masking")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--in", dest="inputs", action="append", metavar="PATH", help="TensorFile input")
    g.add_argument("--synth-spec", help="synthetic map structure as JSON text or a JSON file")
    g.add_argument("--heads", type=int, help="number of synthetic maps / heads")
    g.add_argument("--out", help="output path (stdout if omitted)")
    g.add_argument("--format", choices=[f.value for f in OutputFormat], help="csv or json")
    g.add_argument("--threads", type=int, help="worker threads")
    g.add_argument(
        "--log-level",
        choices=["debug", "info", "warning", "error"],
        default="warning",
        help="log level (logs go to stderr)",
    )
    g.add_argument("--json-logs", action="store_true", default=False, help="JSON log lines")
    return p


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subcommand per task."""
    common = _common_parser()
    parser = _Parser(prog="vecsparse", description="Vector-wise sparse attention lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, metavar="TASK")

    def task(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            name, parents=[common], help=help_text, argument_default=argparse.SUPPRESS
        )

    task("attend", "sparse attention vs dense oracle")
    task("select", "tiled important-vector selection")

    curves = task("curves", "sparsity/recall curves")
    curves.add_argument(
        "--family",
        dest="families",
        action="append",
        type=_family,
        help="region family, e.g. vvec:64, block:64, stripe:64:4, oracle, line_pool",
    )
    curves.add_argument("--max-points", type=int, help="curve point limit")

    heatmap = task("heatmap", "filter recall at calibrated sparsity")
    heatmap.add_argument(
        "--filter",
        dest="filters",
        action="append",
        choices=[f.value for f in FilterKind],
        help="filter kind (repeatable; default all)",
    )
    heatmap.add_argument("--target-sparsity", action="append", type=float, help="sparsity target")

    dp = task("dp", "per-head margin allocation")
    dp.add_argument("--target-sparsity", action="append", type=float, help="sparsity target")
    dp.add_argument("--profiles", help="head profile JSON")
    dp.add_argument("--resolution", type=int, help="sparsity buckets")
    dp.add_argument("--alpha-grid", type=_float_list, help="margins to profile, e.g. 0,0.5,1,2")

    cost = task("cost", "memory traffic and FLOP model")
    cost.add_argument("--rho", type=float, help="sparsity")
    cost.add_argument("--passes", type=float, help="score-map round trips")
    cost.add_argument("--method", choices=["naive", "tiling"], help="selection method")

    synth = task("synth", "write synthetic maps or Q/K/V")
    synth.add_argument("--kind", choices=["map", "qkv"], help="what to write")

    ablate = task("ablate", "selection and error across tile geometries")
    ablate.add_argument("--pq-grid", type=_int_list, help="pool sizes, e.g. 16,32,64")
    ablate.add_argument("--bk-grid", type=_int_list, help="K-tile sizes")
    ablate.add_argument("--gk-grid", type=_int_list, help="K-tiles per group")

    context = task("context", "cost model across sequence lengths")
    context.add_argument("--lengths", type=_int_list, help="sequence lengths, e.g. 4096,16384")
    context.add_argument("--rho", type=float, help="sparsity")
    context.add_argument("--passes", type=float, help="score-map round trips")
    return parser


def _synth_layer(text: str) -> dict[str, Any]:
    raw = text if text.lstrip().startswith("{") else Path(text).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        msg = f"--synth-spec is not valid JSON: {e}"
        raise ConfigurationError(msg) from e
    if not isinstance(data, dict):
        msg = "--synth-spec must be a JSON object"
        raise ConfigurationError(msg)
    return data


def flag_layer(args: argparse.Namespace) -> dict[str, Any]:
    """Config mapping holding only the flags given on the command line."""
    given = vars(args)
    layer: dict[str, Any] = {}
    direct = (
        "n", "d", "mode", "causal", "seed", "inputs", "heads", "format", "threads",
        "filters", "target_sparsity", "profiles", "resolution", "alpha_grid",
        "rho", "passes", "method", "kind", "max_points", "pq_grid", "bk_grid", "gk_grid",
        "lengths",
    )  # fmt: skip
    for key in direct:
        if key in given:
            layer[key] = given[key]
    geometry = {key: given[key] for key in ("pq", "bk", "gk") if key in given}
    if geometry:
        layer["geometry"] = geometry
    if "alpha" in given:
        layer["filter"] = {"alpha": given["alpha"]}
    if "out" in given:
        layer["output"] = given["out"]
    if "families" in given:
        layer["families"] = [f.model_dump(mode="json") for f in given["families"]]
    if "synth_spec" in given:
        layer["synth"] = _synth_layer(given["synth_spec"])
    return layer


# ============================================================================
# Entry point
# ============================================================================


def run(cfg: ExperimentConfig) -> str:
    """Run one configured task and deliver its results.

    Returns:
        The serialized results
    """
    with LogContext(logger, task=cfg.task.value, seed=cfg.seed) as log:
        log.debug("task started")
        kind, results = TASKS[cfg.task](cfg)
        if cfg.task is Task.SYNTH:
            return ""
        text = emit_results(kind, results, cfg.format, cfg.output)
        if cfg.output is None:
            sys.stdout.write(text)
        log.debug("task finished", output=cfg.output or "stdout")
        return text


def main(argv: Sequence[str] | None = None) -> int:
    """CLI entry point; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e.message}\n")
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    configure_logging(getattr(logging, args.log_level.upper()), json_format=args.json_logs)
    try:
        file_layer = load_config_file(args.config) if "config" in vars(args) else {}
        cfg = build_config(Task(args.task), file_layer, flag_layer(args))
        run(cfg)
    except (InfeasibleError, DegenerateRowError) as e:
        logger.error("computation failed", error=e.message, **e.details)
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_INFEASIBLE
    except VecSparseError as e:
        logger.error("invalid input", error=e.message)
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_INPUT
    except ValidationError as e:
        sys.stderr.write(f"error: invalid configuration\n{e}\n")
        return EXIT_INPUT
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
