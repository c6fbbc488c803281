"""
mrfsim Caching Layer

Content hashing of numeric inputs and a bounded in-memory cache used for expensive,
reusable artifacts (spatial responses, gridding plans, dictionaries).
"""

import hashlib
import json
import threading
from collections import OrderedDict
from typing import Any, Dict, Optional

import numpy as np
import structlog

logger = structlog.get_logger(__name__)


def content_hash(*parts: Any) -> str:
    """SHA-256 over arrays (dtype, shape, bytes) and JSON-able values; first 16 hex chars."""
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            array = np.ascontiguousarray(part)
            digest.update(array.dtype.str.encode())
            digest.update(repr(array.shape).encode())
            digest.update(array.tobytes())
        else:
            digest.update(json.dumps(part, sort_keys=True, default=str).encode())
        digest.update(b"|")
    return digest.hexdigest()[:16]


class MemoryCache:
    """Size-bounded LRU cache, safe to share between worker threads."""

    def __init__(self, max_size: int = 8):
        self.cache: "OrderedDict[str, Any]" = OrderedDict()
        self.max_size = max_size
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        self._sets = 0
        self._evictions = 0

    def get(self, key: str) -> Optional[Any]:
        with self._lock:
            if key not in self.cache:
                self._misses += 1
                return None
            self.cache.move_to_end(key)
            self._hits += 1
            return self.cache[key]

    def set(self, key: str, value: Any) -> None:
        with self._lock:
            if key in self.cache:
                self.cache.move_to_end(key)
            elif len(self.cache) >= self.max_size:
                evicted, _ = self.cache.popitem(last=False)
                self._evictions += 1
                logger.debug("Cache eviction", key=evicted)
            self.cache[key] = value
            self._sets += 1

    def delete(self, key: str) -> bool:
        with self._lock:
            return self.cache.pop(key, None) is not None

    def clear(self) -> None:
        with self._lock:
            self.cache.clear()

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self.cache

    def get_stats(self) -> Dict[str, Any]:
        """Get memory cache statistics."""
        return {
            "type": "memory",
            "size": len(self.cache),
            "max_size": self.max_size,
            "hits": self._hits,
            "misses": self._misses,
            "hit_rate": self._hits / max(self._hits + self._misses, 1),
            "sets": self._sets,
            "evictions": self._evictions,
        }
