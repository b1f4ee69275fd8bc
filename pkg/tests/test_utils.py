"""Tests for utility modules."""

from __future__ import annotations

import logging
import threading

import numpy as np

from vecsparse.patterns import clear_pooled_cache, pooled_view
from vecsparse.utils.cache import CacheManager
from vecsparse.utils.logging import LogContext, configure_logging, get_logger
from vecsparse.utils.parallel import ordered_map


class TestCacheManager:
    """Test CacheManager utility."""

    def test_set_and_get(self) -> None:
        """Test setting and getting values."""
        cache: CacheManager[str] = CacheManager()
        cache.set("key1", "value1")
        assert cache.get("key1") == "value1"

    def test_get_missing_key(self) -> None:
        """Test getting non-existent key."""
        cache: CacheManager[str] = CacheManager()
        assert cache.get("missing") is None

    def test_clear(self) -> None:
        """Test clearing all values."""
        cache: CacheManager[str] = CacheManager()
        cache.set("key1", "value1")
        cache.set("key2", "value2")
        cache.clear()
        assert cache.get("key1") is None
        assert cache.get("key2") is None

    def test_lru_eviction(self) -> None:
        """Test the least recently used entry is evicted first."""
        cache: CacheManager[int] = CacheManager(maxsize=2)
        cache.set("a", 1)
        cache.set("b", 2)
        assert cache.get("a") == 1
        cache.set("c", 3)
        assert cache.get("a") == 1
        assert cache.get("b") is None
        assert cache.get("c") == 3

    def test_get_or_set(self) -> None:
        """Test get_or_set only calls the factory once."""
        cache: CacheManager[int] = CacheManager()
        factory_called = [0]

        def factory() -> int:
            factory_called[0] += 1
            return 42

        assert cache.get_or_set("key", factory) == 42
        assert cache.get_or_set("key", factory) == 42
        assert factory_called[0] == 1

    def test_pooled_view_is_memoized(self, synth_map: np.ndarray) -> None:
        """Test equal maps share one pooled view until the cache is cleared."""
        first = pooled_view(synth_map, 16)
        assert pooled_view(synth_map.copy(), 16) is first
        assert pooled_view(synth_map, 32) is not first
        clear_pooled_cache()
        assert pooled_view(synth_map, 16) is not first


class TestOrderedMap:
    """Test ordered_map fan-out."""

    def test_inline(self) -> None:
        """Test a single thread runs inline."""
        seen: list[str] = []

        def record(x: int) -> int:
            seen.append(threading.current_thread().name)
            return x * x

        assert ordered_map(record, range(5), threads=1) == [0, 1, 4, 9, 16]
        assert set(seen) == {threading.current_thread().name}

    def test_threaded_keeps_order(self) -> None:
        """Test results come back in input order regardless of threads."""
        items = list(range(50))
        assert ordered_map(lambda x: x + 1, items, threads=8) == [x + 1 for x in items]

    def test_empty(self) -> None:
        """Test empty input."""
        assert ordered_map(lambda x: x, [], threads=4) == []


class TestLogging:
    """Test logging utilities."""

    def test_configure_logging_default(self) -> None:
        """Test configuring logging with defaults."""
        configure_logging()
        assert logging.getLogger().level == logging.WARNING

    def test_configure_logging_with_level(self) -> None:
        """Test configuring logging with custom level."""
        configure_logging(level=logging.DEBUG)
        assert logging.getLogger().level == logging.DEBUG

    def test_configure_logging_json_format(self) -> None:
        """Test configuring logging with JSON format."""
        configure_logging(json_format=True)
        # Should not raise

    def test_get_logger(self) -> None:
        """Test getting a logger."""
        logger = get_logger("vecsparse.test")
        assert logger is not None

    def test_log_context_init(self) -> None:
        """Test LogContext initialization."""
        logger = get_logger("context-test")
        context = LogContext(logger, task="attend", seed=7)
        assert context._logger is logger
        assert context._context == {"task": "attend", "seed": 7}

    def test_log_context_enter(self) -> None:
        """Test LogContext yields a bound logger."""
        logger = get_logger("enter-test")
        with LogContext(logger, task="cost") as bound:
            assert bound is not None
