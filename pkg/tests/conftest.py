"""Pytest fixtures for vecsparse tests.

Random operands come from seeded generators so every test is deterministic.
Binary fixtures live in fixtures/ as whitespace-separated hex.
"""

from __future__ import annotations

from collections.abc import Iterator
from pathlib import Path

import numpy as np
import pytest

from vecsparse.patterns import SynthSpec, clear_pooled_cache, synth_attention_map
from vecsparse.types import AttnConfig, TileGeometry

# ============================================================================
# Fixture Loading Utilities
# ============================================================================

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def load_hex_fixture(name: str) -> bytes:
    """Load a hex fixture file by name.

    Args:
        name: Fixture name (without .hex extension)

    Returns:
        Decoded bytes
    """
    text = (FIXTURES_DIR / f"{name}.hex").read_text(encoding="ascii")
    return bytes.fromhex("".join(text.split()))


def random_matrices(
    seed: int, rows: int, cols: int, count: int = 3
) -> list[np.ndarray]:
    """``count`` standard-normal float32 matrices from one seed."""
    rng = np.random.default_rng(seed)
    return [rng.standard_normal((rows, cols)).astype(np.float32) for _ in range(count)]


def random_instance(seed: int) -> tuple[list[np.ndarray], AttnConfig, TileGeometry, float]:
    """Seeded Q/K/V with a shape, masking, tiling and margin chosen by ``seed``."""
    n = (17, 33, 64, 97)[seed % 4]
    d = (4, 8, 16)[seed % 3]
    qkv = random_matrices(1000 + seed, n, d)
    cfg = AttnConfig.for_inputs(qkv[0], qkv[1], causal=(seed // 4) % 2 == 1)
    geom = TileGeometry(
        pq=(8, 16)[(seed // 2) % 2],
        bk=(3, 4, 8)[(seed // 3) % 3],
        gk=(1, 2, 3)[(seed // 5) % 3],
    )
    alpha = (0.25, 1.0, 3.0)[(seed // 7) % 3]
    return qkv, cfg, geom, alpha


# ============================================================================
# Operand Fixtures
# ============================================================================


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def qkv() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q, K, V of shape (256, 32)."""
    q, k, v = random_matrices(7, 256, 32)
    return q, k, v


@pytest.fixture
def small_qkv() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q, K, V of shape (37, 8); 37 is prime so every tiling is ragged."""
    q, k, v = random_matrices(11, 37, 8)
    return q, k, v


@pytest.fixture
def geometry() -> TileGeometry:
    """Small tiles: 16-row blocks, 8-key tiles, 4 tiles per group."""
    return TileGeometry(pq=16, bk=8, gk=4)


@pytest.fixture
def attn_config() -> AttnConfig:
    """Config matching the ``qkv`` fixture."""
    return AttnConfig(seq_len=256, head_dim=32)


@pytest.fixture
def synth_map() -> np.ndarray:
    """128 x 128 map with 32-row column segments."""
    spec = SynthSpec(segments_per_block=4, segment_len=32, hot_mass=0.9)
    return synth_attention_map(128, spec, seed=3)


@pytest.fixture(autouse=True)
def _fresh_pooled_cache() -> Iterator[None]:
    """Isolate tests from views memoized by earlier ones."""
    clear_pooled_cache()
    yield
    clear_pooled_cache()
