"""vecsparse - vector-wise sparse attention reference implementation and lab.

Query blocks are mean-pooled, scored against every key and filtered with
minS (keep keys within a margin of the row maximum) inside a tiled score
loop, so only selected key indices are ever stored. Attention then gathers
those keys per query block and accumulates with an online softmax. Around
this core sit a sparse-pattern lab (region families, sparsity/recall curves,
filter calibration), a per-head margin allocator and a memory-traffic model.

Example:
    >>> import numpy as np
    >>> from vecsparse import AttnConfig, TileGeometry, tiling_select, vector_sparse_attention
    >>>
    >>> rng = np.random.default_rng(0)
    >>> q, k, v = (rng.standard_normal((256, 64)).astype(np.float32) for _ in range(3))
    >>> cfg = AttnConfig.for_inputs(q, k)
    >>> geom = TileGeometry(pq=64, bk=16, gk=4)
    >>> sel = tiling_select(q, k, cfg, geom, alpha=2.0)
    >>> out = vector_sparse_attention(q, k, v, sel, cfg, geom)
"""

from vecsparse.ablation import GeometryPoint, geometry_ablation, geometry_grid
from vecsparse.allocation import (
    AllocationResult,
    HeadProfile,
    ProfileSample,
    dp_allocate,
    exhaustive_allocate,
    profile_head,
    profile_heads,
)
from vecsparse.config import ExperimentConfig, OutputFormat, Task, build_config
from vecsparse.cost import (
    ContextPoint,
    CostPhase,
    CostReport,
    CostTotals,
    HardwareSpec,
    calibrate_pass_count,
    context_sweep,
    flops_attention,
    report_from_counter,
    roofline_seconds,
    total_report,
    traffic_dense_attention,
    traffic_naive_select,
    traffic_sparse_attention,
    traffic_tiling_select,
)
from vecsparse.exceptions import (
    ConfigurationError,
    DegenerateRowError,
    InfeasibleError,
    InputError,
    ParameterError,
    SelectionIndexError,
    ShapeError,
    TensorFormatError,
    VecSparseError,
)
from vecsparse.filters import (
    MinSFilter,
    RowFilter,
    TopKFilter,
    TopPFilter,
    make_filter,
    mean_pool_queries,
    mins_filter,
    row_filter_stats,
    select_rows,
    topk_filter,
    topp_filter,
)
from vecsparse.patterns import (
    HeatmapCell,
    PatternMask,
    PooledView,
    RegionFamily,
    RegionKind,
    SynthSpec,
    TradeoffCurve,
    calibrate_filter,
    curve_auc,
    enumerate_regions,
    pattern_mask,
    pooled_view,
    recall_at_sparsity,
    recall_heatmap,
    region_importance,
    synth_attention_map,
    tradeoff_curve,
    tradeoff_curves,
)
from vecsparse.results import ResultKind, emit_results
from vecsparse.selection import (
    TrafficCounter,
    exact_mins_select,
    pad_selection,
    selection_sparsity,
    strip_padding,
    tiling_select,
)
from vecsparse.sparse_attention import (
    OutputError,
    direct_sparse_attention,
    sparse_output_error,
    vector_sparse_attention,
)
from vecsparse.tensor import apply_causal_mask, dense_attention, row_softmax
from vecsparse.tensor_io import load_tensor, save_tensor
from vecsparse.types import (
    AttnConfig,
    FilterKind,
    FilterSpec,
    Matrix,
    RowMask,
    SelectionSet,
    SelectMode,
    TileGeometry,
)

__version__ = "0.1.0"
__all__ = [
    # Configuration
    "AttnConfig",
    "TileGeometry",
    "FilterKind",
    "FilterSpec",
    "SelectMode",
    "ExperimentConfig",
    "OutputFormat",
    "Task",
    "build_config",
    # Core tensors
    "Matrix",
    "apply_causal_mask",
    "row_softmax",
    "dense_attention",
    # Pooling and filters
    "RowMask",
    "mean_pool_queries",
    "mins_filter",
    "topk_filter",
    "topp_filter",
    "row_filter_stats",
    "RowFilter",
    "MinSFilter",
    "TopKFilter",
    "TopPFilter",
    "make_filter",
    "select_rows",
    # Selection
    "SelectionSet",
    "TrafficCounter",
    "tiling_select",
    "exact_mins_select",
    "selection_sparsity",
    "pad_selection",
    "strip_padding",
    # Sparse attention
    "vector_sparse_attention",
    "direct_sparse_attention",
    "OutputError",
    "sparse_output_error",
    # Pattern lab
    "RegionKind",
    "RegionFamily",
    "PatternMask",
    "TradeoffCurve",
    "SynthSpec",
    "PooledView",
    "HeatmapCell",
    "enumerate_regions",
    "region_importance",
    "pattern_mask",
    "tradeoff_curve",
    "tradeoff_curves",
    "curve_auc",
    "recall_at_sparsity",
    "synth_attention_map",
    "pooled_view",
    "calibrate_filter",
    "recall_heatmap",
    # Ratio allocation
    "ProfileSample",
    "HeadProfile",
    "AllocationResult",
    "profile_head",
    "profile_heads",
    "dp_allocate",
    "exhaustive_allocate",
    # Cost model
    "CostPhase",
    "CostReport",
    "CostTotals",
    "HardwareSpec",
    "traffic_naive_select",
    "traffic_tiling_select",
    "traffic_dense_attention",
    "traffic_sparse_attention",
    "flops_attention",
    "calibrate_pass_count",
    "total_report",
    "report_from_counter",
    "roofline_seconds",
    "ContextPoint",
    "context_sweep",
    # Geometry ablation
    "GeometryPoint",
    "geometry_grid",
    "geometry_ablation",
    # I/O
    "load_tensor",
    "save_tensor",
    "ResultKind",
    "emit_results",
    # Exceptions
    "VecSparseError",
    "ConfigurationError",
    "InputError",
    "ShapeError",
    "ParameterError",
    "DegenerateRowError",
    "SelectionIndexError",
    "InfeasibleError",
    "TensorFormatError",
]
