"""TensorFile reading and writing.

Layout, all little-endian regardless of host::

    offset 0   b"VAT1"
    offset 4   uint32 ndims, 1 <= ndims <= 3
    offset 8   uint32 dims[ndims]
    then       float32 payload, row-major, 4 * prod(dims) bytes

A 3-D tensor is a stack (heads x rows x cols); Q/K/V files stack the three
operands on the first axis.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt
from pydantic import TypeAdapter

from vecsparse.allocation import HeadProfile
from vecsparse.exceptions import ShapeError, TensorFormatError
from vecsparse.types import Matrix

MAGIC = b"VAT1"
MAX_DIMS = 3

PathLike = Union[str, Path]

_HEADER = 8
_U32_MAX = 2**32 - 1


def parse_tensor(data: bytes) -> npt.NDArray[np.float32]:
    """Decode TensorFile bytes.

    Raises:
        TensorFormatError: On a bad magic, rank, truncated header or a
            payload whose length disagrees with the dims; the message names
            the byte offset
    """
    if data[:4] != MAGIC:
        msg = f"bad magic {data[:4]!r}, expected {MAGIC!r}"
        raise TensorFormatError(msg, offset=0)
    if len(data) < _HEADER:
        msg = "truncated rank field"
        raise TensorFormatError(msg, offset=4)
    ndims = int(np.frombuffer(data, dtype="<u4", count=1, offset=4)[0])
    if not 1 <= ndims <= MAX_DIMS:
        msg = f"rank {ndims} not in 1..{MAX_DIMS}"
        raise TensorFormatError(msg, offset=4)
    header_end = _HEADER + 4 * ndims
    if len(data) < header_end:
        complete = (len(data) - _HEADER) // 4
        msg = f"truncated dims: {complete} of {ndims} present"
        raise TensorFormatError(msg, offset=_HEADER + 4 * complete)
    dims = tuple(int(x) for x in np.frombuffer(data, dtype="<u4", count=ndims, offset=_HEADER))
    expected = 4 * math.prod(dims)
    actual = len(data) - header_end
    if actual != expected:
        msg = f"payload is {actual} bytes, dims {list(dims)} need {expected}"
        raise TensorFormatError(
            msg,
            offset=header_end,
        )
    payload = np.frombuffer(data, dtype="<f4", offset=header_end)
    return payload.reshape(dims).astype(np.float32)


def encode_tensor(arr: npt.ArrayLike) -> bytes:
    """Encode an array as TensorFile bytes, storing float32.

    Raises:
        ShapeError: If the rank is outside 1..3 or a dimension does not fit in 32 bits
    """
    a = np.asarray(arr)
    if not 1 <= a.ndim <= MAX_DIMS:
        msg = f"rank must lie in 1..{MAX_DIMS}"
        raise ShapeError(msg, actual=a.ndim)
    if any(dim > _U32_MAX for dim in a.shape):
        msg = "dimension exceeds uint32"
        raise ShapeError(msg, actual=a.shape)
    header = np.array([a.ndim, *a.shape], dtype="<u4").tobytes()
    return MAGIC + header + np.ascontiguousarray(a, dtype="<f4").tobytes()


def load_tensor(path: PathLike) -> npt.NDArray[np.float32]:
    """Read a TensorFile; 1-, 2- or 3-D."""
    return parse_tensor(Path(path).read_bytes())


def save_tensor(path: PathLike, arr: npt.ArrayLike) -> None:
    """Write a TensorFile; float32 data round-trips bit for bit."""
    Path(path).write_bytes(encode_tensor(arr))


def load_stack(path: PathLike) -> npt.NDArray[np.float32]:
    """Read a matrix or a stack of matrices, always returned 3-D.

    Raises:
        ShapeError: If the file holds a 1-D tensor
    """
    t = load_tensor(path)
    if t.ndim == 1:
        msg = "expected a matrix or a stack of matrices"
        raise ShapeError(msg, actual=t.shape)
    return t[None] if t.ndim == 2 else t


def load_qkv(path: PathLike) -> tuple[Matrix, Matrix, Matrix]:
    """Read a (3, N, D) stack as Q, K, V.

    Raises:
        ShapeError: If the file is not a three-matrix stack
    """
    t = load_tensor(path)
    if t.ndim != 3 or t.shape[0] != 3:
        msg = "Q/K/V file must hold a (3, N, D) stack"
        raise ShapeError(msg, expected=3, actual=t.shape)
    return t[0], t[1], t[2]


_PROFILES = TypeAdapter(list[HeadProfile])


def load_profiles(path: PathLike) -> list[HeadProfile]:
    """Read head profiles from a JSON array."""
    return _PROFILES.validate_json(Path(path).read_bytes())


def dump_profiles(profiles: list[HeadProfile]) -> str:
    """Serialize head profiles to a JSON array with a trailing newline."""
    return _PROFILES.dump_json(profiles, indent=2).decode("utf-8") + "\n"
