"""vecsparse Utilities."""

from vecsparse.utils.cache import CacheManager
from vecsparse.utils.logging import LogContext, configure_logging, get_logger
from vecsparse.utils.parallel import ordered_map

__all__ = [
    "CacheManager",
    "LogContext",
    "configure_logging",
    "get_logger",
    "ordered_map",
]
