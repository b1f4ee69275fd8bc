"""vecsparse Type Definitions.

Configuration and selection types are Pydantic v2 models for runtime
validation and JSON serialization. Dense numeric carriers are NumPy arrays.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from vecsparse.exceptions import InputError, SelectionIndexError

# Row-major 2-D float32 array: Q, K, V, S, A and O.
Matrix = npt.NDArray[np.float32]


class FilterKind(str, Enum):
    """Row-wise importance filter."""

    MINS = "minS"
    TOPK = "topK"
    TOPP = "topP"


class SelectMode(str, Enum):
    """Threshold discipline inside a K-tile group.

    - ONE_PASS: each tile is filtered against the running max seen so far
    - TWO_PASS: every tile is filtered against the group's final running max
    """

    ONE_PASS = "one_pass"
    TWO_PASS = "two_pass"


class AttnConfig(BaseModel):
    """Attention problem shape.

    Attributes:
        seq_len: Number of keys N
        head_dim: Head dimension D
        causal: Whether query i only sees keys j <= i
        scale: Score scale, defaults to 1/sqrt(D)
    """

    model_config = ConfigDict(frozen=True)

    seq_len: int = Field(..., ge=1, description="Sequence length N")
    head_dim: int = Field(..., ge=1, description="Head dimension D")
    causal: bool = Field(default=False, description="Apply causal masking")
    scale: float = Field(default=0.0, gt=0, description="Score scale (default 1/sqrt(D))")

    @model_validator(mode="before")
    @classmethod
    def default_scale(cls, data: Any) -> Any:
        """Fill in 1/sqrt(D) when no scale is given."""
        if isinstance(data, dict) and data.get("scale") is None:
            head_dim = data.get("head_dim")
            if isinstance(head_dim, int) and head_dim >= 1:
                data = {**data, "scale": 1.0 / math.sqrt(head_dim)}
        return data

    @classmethod
    def for_inputs(
        cls,
        q: npt.NDArray[Any],
        k: npt.NDArray[Any],
        *,
        causal: bool = False,
        scale: float | None = None,
    ) -> AttnConfig:
        """Build a config matching the given query and key matrices."""
        return cls(seq_len=int(k.shape[0]), head_dim=int(q.shape[-1]), causal=causal, scale=scale)


class TileGeometry(BaseModel):
    """Tiling parameters for selection and sparse attention.

    ``pq`` is simultaneously the query pooling size, the vector height and
    the query block height.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    pq: int = Field(default=64, ge=1, description="Query pooling / vector size")
    bk: int = Field(default=16, ge=1, description="K-tile size")
    gk: int = Field(default=16, ge=1, description="K-tiles per group")

    @property
    def group_width(self) -> int:
        """Keys covered by one K-tile group."""
        return self.bk * self.gk


class FilterSpec(BaseModel):
    """Filter kind and its parameter; only the field matching ``kind`` is used."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: FilterKind = Field(default=FilterKind.MINS, description="Filter strategy")
    alpha: float = Field(default=1.0, ge=0, description="minS margin in scaled-logit units")
    k: int = Field(default=1, ge=1, description="topK cardinality")
    p: float = Field(default=0.9, gt=0, le=1, description="topP cumulative mass")

    @property
    def parameter(self) -> float:
        """Value of the meaningful parameter."""
        if self.kind is FilterKind.MINS:
            return self.alpha
        if self.kind is FilterKind.TOPK:
            return float(self.k)
        return self.p


class RowMask(BaseModel):
    """Columns kept for one score row, ascending."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    row: int = Field(default=0, ge=0, description="Row index")
    width: int = Field(..., ge=0, description="Number of columns in the row")
    selected: np.ndarray = Field(..., description="Ascending column indices")

    @field_validator("selected", mode="before")
    @classmethod
    def as_index_array(cls, v: Any) -> np.ndarray:
        """Copy into an int64 array."""
        return np.array(v, dtype=np.int64).reshape(-1)

    @model_validator(mode="after")
    def check_indices(self) -> RowMask:
        """Indices strictly ascending and inside the row."""
        sel = self.selected
        if sel.ndim != 1:
            msg = "selected must be one-dimensional"
            raise InputError(msg)
        if sel.size and (sel[0] < 0 or sel[-1] >= self.width):
            msg = "selected column out of range"
            raise SelectionIndexError(msg, index=int(sel[-1]))
        if sel.size > 1 and not bool(np.all(np.diff(sel) > 0)):
            msg = "selected columns must be strictly ascending"
            raise InputError(msg)
        sel.setflags(write=False)
        return self

    @property
    def count(self) -> int:
        """Number of selected columns."""
        return int(self.selected.size)


class SelectionSet(BaseModel):
    """Ragged per-query-block key indices in CSR form.

    Block ``i`` covers query rows ``[i * block_size, min((i + 1) * block_size,
    num_queries))`` and selects ``indices[offsets[i]:offsets[i + 1]]``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    num_keys: int = Field(..., ge=1, description="Key count N")
    num_queries: int = Field(..., ge=1, description="Query row count")
    block_size: int = Field(..., ge=1, description="Query block height Pq")
    causal: bool = Field(default=False, description="Selection made under causal masking")
    offsets: np.ndarray = Field(..., description="Prefix sums, length num_blocks + 1")
    indices: np.ndarray = Field(..., description="Flat ascending-per-block key indices")

    @field_validator("offsets", "indices", mode="before")
    @classmethod
    def as_index_array(cls, v: Any) -> np.ndarray:
        """Copy into an int64 array."""
        return np.array(v, dtype=np.int64).reshape(-1)

    @model_validator(mode="after")
    def check_layout(self) -> SelectionSet:
        """Validate CSR layout, ordering, range and causal safety."""
        offsets = self.offsets
        indices = self.indices
        num_blocks = -(-self.num_queries // self.block_size)
        if offsets.shape != (num_blocks + 1,):
            msg = "offsets length must equal num_blocks + 1"
            raise InputError(
                msg,
                details={"expected": num_blocks + 1, "actual": int(offsets.size)},
            )
        if offsets[0] != 0 or offsets[-1] != indices.size:
            msg = "offsets must start at 0 and end at len(indices)"
            raise InputError(msg)
        counts = np.diff(offsets)
        if bool(np.any(counts < 0)):
            msg = "offsets must be non-decreasing"
            raise InputError(msg)
        if indices.size:
            bad = np.flatnonzero((indices < 0) | (indices >= self.num_keys))
            if bad.size:
                block = int(np.searchsorted(offsets, bad[0], side="right") - 1)
                msg = "selected key index out of range"
                raise SelectionIndexError(
                    msg,
                    block=block,
                    index=int(indices[bad[0]]),
                )
            rising = np.diff(indices) > 0
            starts = offsets[1:-1]
            starts = starts[(starts > 0) & (starts < indices.size)]
            rising[starts - 1] = True
            if not bool(np.all(rising)):
                msg = "indices must be strictly ascending within each block"
                raise InputError(msg)
            if self.causal:
                last_rows = np.minimum(
                    (np.arange(num_blocks) + 1) * self.block_size, self.num_queries
                ) - 1
                limit = np.repeat(last_rows, counts)
                if bool(np.any(indices > limit)):
                    msg = "causal selection references a future key"
                    raise InputError(msg)
        offsets.setflags(write=False)
        indices.setflags(write=False)
        return self

    @property
    def num_blocks(self) -> int:
        """Number of query blocks Np."""
        return int(self.offsets.size - 1)

    @property
    def counts(self) -> npt.NDArray[np.int64]:
        """Per-block selection counts C."""
        return np.diff(self.offsets)

    def block(self, i: int) -> npt.NDArray[np.int64]:
        """Selected key indices of block ``i``."""
        return self.indices[self.offsets[i] : self.offsets[i + 1]]

    def block_rows(self, i: int) -> tuple[int, int]:
        """Half-open query row range of block ``i``."""
        start = i * self.block_size
        return start, min(start + self.block_size, self.num_queries)

    def blocks(self) -> list[npt.NDArray[np.int64]]:
        """All blocks as a list of index arrays."""
        return [self.block(i) for i in range(self.num_blocks)]

    def issuperset(self, other: SelectionSet) -> bool:
        """Block-wise superset test against a selection of the same layout."""
        if other.num_blocks != self.num_blocks:
            return False
        return all(
            np.isin(other.block(i), self.block(i), assume_unique=True).all()
            for i in range(self.num_blocks)
        )

    def equals(self, other: SelectionSet) -> bool:
        """Exact equality of layout and indices."""
        return (
            self.num_blocks == other.num_blocks
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.indices, other.indices)
        )

    @classmethod
    def from_blocks(
        cls,
        blocks: Sequence[npt.ArrayLike],
        *,
        num_keys: int,
        num_queries: int,
        block_size: int,
        causal: bool = False,
    ) -> SelectionSet:
        """Build from one index array per block; each is sorted and deduplicated."""
        canon = [np.unique(np.asarray(b, dtype=np.int64)) for b in blocks]
        counts = np.array([c.size for c in canon], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = np.concatenate(canon) if canon else np.zeros(0, dtype=np.int64)
        return cls(
            num_keys=num_keys,
            num_queries=num_queries,
            block_size=block_size,
            causal=causal,
            offsets=offsets,
            indices=indices.astype(np.int64),
        )

    @classmethod
    def from_pairs(
        cls,
        block_ids: npt.NDArray[np.int64],
        columns: npt.NDArray[np.int64],
        *,
        num_keys: int,
        num_queries: int,
        block_size: int,
        causal: bool = False,
    ) -> SelectionSet:
        """Build from unordered (block, column) pairs, canonicalising the order."""
        num_blocks = -(-num_queries // block_size)
        keys = np.unique(block_ids.astype(np.int64) * num_keys + columns.astype(np.int64))
        rows = keys // num_keys
        counts = np.bincount(rows, minlength=num_blocks).astype(np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(
            num_keys=num_keys,
            num_queries=num_queries,
            block_size=block_size,
            causal=causal,
            offsets=offsets,
            indices=(keys % num_keys).astype(np.int64),
        )

    @classmethod
    def full(
        cls,
        *,
        num_keys: int,
        num_queries: int,
        block_size: int,
        causal: bool = False,
    ) -> SelectionSet:
        """Every selectable key for every block."""
        num_blocks = -(-num_queries // block_size)
        blocks = []
        for i in range(num_blocks):
            stop = min((i + 1) * block_size, num_queries)
            width = min(stop, num_keys) if causal else num_keys
            blocks.append(np.arange(width, dtype=np.int64))
        return cls.from_blocks(
            blocks,
            num_keys=num_keys,
            num_queries=num_queries,
            block_size=block_size,
            causal=causal,
        )
