"""Memoisation of derived arrays."""

from __future__ import annotations

from typing import Callable, Generic, TypeVar

from cachetools import LRUCache

T = TypeVar("T")


class CacheManager(Generic[T]):
    """Bounded least-recently-used cache keyed by a content digest.

    Pooled views of attention maps are rebuilt from scratch on a miss, so
    eviction only costs time.
    """

    def __init__(self, maxsize: int = 32) -> None:
        self._cache: LRUCache[str, T] = LRUCache(maxsize=maxsize)

    def get(self, key: str) -> T | None:
        """Cached value, or None on a miss."""
        result: T | None = self._cache.get(key)
        return result

    def set(self, key: str, value: T) -> None:
        self._cache[key] = value

    def clear(self) -> None:
        self._cache.clear()

    def get_or_set(self, key: str, factory: Callable[[], T]) -> T:
        """Get from cache or build with ``factory`` and store.

        Args:
            key: Content digest
            factory: Builds the value on a miss

        Returns:
            Cached or newly built value
        """
        value = self.get(key)
        if value is None:
            value = factory()
            self.set(key, value)
        return value
