"""Experiment configuration.

An experiment is described by one frozen :class:`ExperimentConfig`. Values
come from built-in defaults, then an optional JSON file, then command-line
flags, each layer overriding the one before. Unknown keys are rejected.
"""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from vecsparse.cost import HardwareSpec
from vecsparse.exceptions import ConfigurationError
from vecsparse.patterns import RegionFamily, RegionKind, SynthSpec
from vecsparse.types import FilterKind, FilterSpec, SelectMode, TileGeometry

DEFAULT_ALPHA_GRID = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0)


class Task(str, Enum):
    """Pipeline an experiment runs."""

    ATTEND = "attend"
    SELECT = "select"
    CURVES = "curves"
    HEATMAP = "heatmap"
    DP = "dp"
    COST = "cost"
    SYNTH = "synth"
    ABLATE = "ablate"
    CONTEXT = "context"


class OutputFormat(str, Enum):
    """Result serialization."""

    CSV = "csv"
    JSON = "json"


class ExperimentConfig(BaseModel):
    """Everything one run needs.

    Attributes:
        task: Pipeline to run
        n: Sequence length for synthetic inputs and cost formulas
        d: Head dimension for synthetic inputs and cost formulas
        geometry: Pool, tile and group sizes
        filter: Filter used by ``attend`` and ``select``
        mode: Threshold discipline of tiled selection
        causal: Apply causal masking
        seed: Root of all randomness
        inputs: TensorFile paths; synthetic data is generated when empty
        synth: Synthetic map structure
        output: Result path; stdout when unset
        format: Result serialization
        families: Region families for ``curves``
        filters: Filter kinds for ``heatmap``
        target_sparsity: Targets for ``heatmap``; the first is used by ``dp``
        heads: Head count for ``dp`` on synthetic maps
        profiles: JSON head-profile file for ``dp``
        alpha_grid: Margins sampled when profiling heads
        resolution: Sparsity buckets per unit for ``dp``
        rho: Sparsity for ``cost``
        passes: Score-map round trips for ``cost``
        method: Selection method costed by ``cost``
        max_points: Curve subsampling limit
        threads: Worker threads
        kind: What ``synth`` writes
        hardware: Storage widths and roofline ceilings for ``cost`` and ``context``
        pq_grid: Pool sizes swept by ``ablate``; the geometry value when empty
        bk_grid: K-tile sizes swept by ``ablate``; the geometry value when empty
        gk_grid: Group sizes swept by ``ablate``; the geometry value when empty
        lengths: Sequence lengths swept by ``context``
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    task: Task = Field(..., description="Pipeline to run")
    n: int = Field(default=256, ge=1, description="Sequence length N")
    d: int = Field(default=64, ge=1, description="Head dimension D")
    geometry: TileGeometry = Field(default_factory=TileGeometry)
    filter: FilterSpec = Field(default_factory=FilterSpec)
    mode: SelectMode = Field(default=SelectMode.ONE_PASS, description="Tiled selection mode")
    causal: bool = Field(default=False, description="Causal masking")
    seed: int = Field(default=0, ge=0, description="Random seed")
    inputs: list[str] = Field(default_factory=list, description="TensorFile inputs")
    synth: SynthSpec = Field(default_factory=SynthSpec)
    output: Optional[str] = Field(default=None, description="Output path (stdout if unset)")
    format: OutputFormat = Field(default=OutputFormat.CSV, description="Output format")
    families: list[RegionFamily] = Field(default_factory=list, description="Curve families")
    filters: list[FilterKind] = Field(
        default_factory=lambda: [FilterKind.MINS, FilterKind.TOPK, FilterKind.TOPP],
        description="Heatmap filters",
    )
    target_sparsity: list[float] = Field(default_factory=list, description="Sparsity targets")
    heads: int = Field(default=1, ge=1, description="Synthetic head count")
    profiles: Optional[str] = Field(default=None, description="Head profile JSON")
    alpha_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    resolution: int = Field(default=101, ge=2, description="DP sparsity buckets")
    rho: float = Field(default=0.9, ge=0, le=1, description="Sparsity for cost")
    passes: float = Field(default=1.0, gt=0, description="Score-map round trips")
    method: Literal["naive", "tiling"] = Field(default="tiling", description="Costed method")
    max_points: Optional[int] = Field(default=None, ge=2, description="Curve point limit")
    threads: int = Field(default=1, ge=1, description="Worker threads")
    kind: Literal["map", "qkv"] = Field(default="map", description="What synth writes")
    hardware: HardwareSpec = Field(default_factory=HardwareSpec)
    pq_grid: list[int] = Field(default_factory=list, description="Ablation pool sizes")
    bk_grid: list[int] = Field(default_factory=list, description="Ablation K-tile sizes")
    gk_grid: list[int] = Field(default_factory=list, description="Ablation group sizes")
    lengths: list[int] = Field(default_factory=list, description="Context sweep lengths")

    @model_validator(mode="after")
    def check_task_fields(self) -> ExperimentConfig:
        """Fields a task cannot run without."""
        for t in self.target_sparsity:
            if not 0.0 <= t <= 1.0:
                msg = f"target sparsity {t} outside [0, 1]"
                raise ValueError(msg)
        if self.task in (Task.HEATMAP, Task.DP) and not self.target_sparsity:
            msg = f"task {self.task.value} needs at least one target sparsity"
            raise ValueError(msg)
        if self.task is Task.CURVES and not self.families:
            msg = "task curves needs at least one family"
            raise ValueError(msg)
        if self.task is Task.CONTEXT and not self.lengths:
            msg = "task context needs at least one sequence length"
            raise ValueError(msg)
        for name in ("pq_grid", "bk_grid", "gk_grid", "lengths"):
            if any(x < 1 for x in getattr(self, name)):
                msg = f"{name} values must be >= 1"
                raise ValueError(msg)
        return self


def load_config_file(path: Union[str, Path]) -> dict[str, Any]:
    """Read a JSON config file into a plain mapping.

    Raises:
        ConfigurationError: If the file is not a JSON object
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        msg = f"config file {path} is not valid JSON: {e}"
        raise ConfigurationError(msg) from e
    if not isinstance(data, dict):
        msg = f"config file {path} must hold a JSON object"
        raise ConfigurationError(msg)
    return data


def merge_layers(*layers: dict[str, Any]) -> dict[str, Any]:
    """Deep-merge mappings; later layers win, nested mappings merge key by key."""
    merged: dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = merge_layers(merged[key], value)
            else:
                merged[key] = value
    return merged


def build_config(
    task: Task,
    file_layer: dict[str, Any] | None = None,
    flag_layer: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Validate defaults < file < flags into one config.

    Raises:
        ConfigurationError: If the file names a different task
        pydantic.ValidationError: On unknown keys or invalid values
    """
    file_layer = dict(file_layer or {})
    declared = file_layer.pop("task", None)
    if declared is not None and declared != task.value:
        msg = f"config file is for task {declared!r}, not {task.value!r}"
        raise ConfigurationError(msg)
    merged = merge_layers({"task": task.value}, file_layer, flag_layer or {})
    return ExperimentConfig.model_validate(merged)


def parse_family(text: str) -> RegionFamily:
    """Parse ``kind`` or ``kind:size`` (``stripe:block:width``) into a family.

    The size sets ``block`` for block and stripe, ``vec`` for vvec and hvec.

    Raises:
        ConfigurationError: On an unknown kind or a malformed size
    """
    parts = text.split(":")
    try:
        kind = RegionKind(parts[0])
        sizes = [int(p) for p in parts[1:]]
    except ValueError as e:
        kinds = [k.value for k in RegionKind]
        msg = f"bad family {text!r}; expected kind[:size] with kind in {kinds}"
        raise ConfigurationError(msg) from e
    fields: dict[str, Any] = {"kind": kind}
    if sizes:
        if kind in (RegionKind.VVEC, RegionKind.HVEC):
            fields["vec"] = sizes[0]
        elif kind in (RegionKind.BLOCK, RegionKind.STRIPE):
            fields["block"] = sizes[0]
            if kind is RegionKind.STRIPE and len(sizes) > 1:
                fields["stripe_w"] = sizes[1]
        else:
            msg = f"family {kind.value} takes no size"
            raise ConfigurationError(msg)
    try:
        return RegionFamily(**fields)
    except ValidationError as e:
        msg = f"bad family {text!r}: {e.errors()[0]['msg']}"
        raise ConfigurationError(msg) from e
