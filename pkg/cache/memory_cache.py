#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Cache backend dùng dict trong bộ nhớ, giới hạn số entry theo LRU.

Giá trị cache là object Python nguyên vẹn (BatchResult, bảng dòng, khai triển
γ, ...), không serialize. Một batch mô phỏng ℓ=128 với 10⁴ replicate nặng vài
MB nên store bị chặn bởi `HSL_CACHE_MAX_ENTRIES`; entry ít dùng nhất bị đẩy ra
trước.

TTL:
- Lazy expiration khi `get`.
- Sweeper nền dọn entry hết hạn mỗi `SWEEP_INTERVAL` giây.

Key theo dạng `<namespace>:...`; `_namespace_index` cho phép `clear_prefix`
chỉ quét một namespace.
"""

import asyncio
import logging
import time
from collections import OrderedDict, defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict, Optional, Set

from cache.base import BaseCache

logger = logging.getLogger(__name__)

SWEEP_INTERVAL = 60


def _namespace(key: str) -> str:
    return key.split(":", 1)[0]


@dataclass
class _Entry:
    payload: Dict[str, Any]
    expires_at: float


class MemoryCache(BaseCache):
    """Cache RAM: TTL, LRU theo số entry, index theo namespace, đếm hit/miss."""

    def __init__(self, max_entries: int = 256):
        if max_entries <= 0:
            raise ValueError(f"max_entries phải dương, nhận được {max_entries}.")
        self.max_entries = max_entries
        self._entries: "OrderedDict[str, _Entry]" = OrderedDict()
        self._by_namespace: Dict[str, Set[str]] = defaultdict(set)
        self._lock = asyncio.Lock()
        self._sweeper: Optional[asyncio.Task] = None
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    # ==================== Lifecycle ====================

    async def connect(self):
        if self._sweeper is None:
            self._sweeper = asyncio.create_task(self._sweep_loop())
            logger.info("In-memory cache sẵn sàng (tối đa %s entry).", self.max_entries)

    async def close(self):
        if self._sweeper is not None:
            self._sweeper.cancel()
            try:
                await self._sweeper
            except asyncio.CancelledError:
                pass
            self._sweeper = None
        async with self._lock:
            size = len(self._entries)
            self._entries.clear()
            self._by_namespace.clear()
        logger.info(
            "Đóng cache: %s hit, %s miss, %s bị đẩy ra, %s entry còn lại.",
            self.hits, self.misses, self.evictions, size,
        )

    # ==================== Store ====================

    def _forget(self, key: str) -> None:
        """Caller phải giữ lock."""
        if self._entries.pop(key, None) is None:
            return
        ns = _namespace(key)
        keys = self._by_namespace.get(ns)
        if keys is not None:
            keys.discard(key)
            if not keys:
                del self._by_namespace[ns]

    async def get(self, key: str) -> Optional[Dict[str, Any]]:
        async with self._lock:
            entry = self._entries.get(key)
            if entry is not None and entry.expires_at <= time.time():
                self._forget(key)
                entry = None
            if entry is None:
                self.misses += 1
                logger.debug("Cache MISS: %s", key)
                return None
            self._entries.move_to_end(key)
            self.hits += 1
            logger.debug("Cache HIT: %s", key)
            return entry.payload

    async def set(self, key: str, value: Any, ttl: int = 3600):
        payload = {"timestamp": datetime.now(timezone.utc).isoformat(), "data": value}
        async with self._lock:
            self._forget(key)
            self._entries[key] = _Entry(payload, time.time() + ttl)
            self._by_namespace[_namespace(key)].add(key)
            while len(self._entries) > self.max_entries:
                oldest = next(iter(self._entries))
                self._forget(oldest)
                self.evictions += 1
                logger.debug("Cache đầy, đẩy ra %s", oldest)

    async def delete(self, key: str):
        async with self._lock:
            self._forget(key)

    async def clear_prefix(self, prefix: str, log_info: bool = True) -> int:
        async with self._lock:
            keys = [k for k in self._by_namespace.get(_namespace(prefix), ()) if k.startswith(prefix)]
            for k in keys:
                self._forget(k)
        if log_info and keys:
            logger.info("Đã xoá %s entry với prefix %r.", len(keys), prefix)
        return len(keys)

    def stats(self) -> Dict[str, int]:
        return {
            "entries": len(self._entries),
            "hits": self.hits,
            "misses": self.misses,
            "evictions": self.evictions,
        }

    async def _sweep_loop(self):
        while True:
            await asyncio.sleep(SWEEP_INTERVAL)
            now = time.time()
            async with self._lock:
                expired = [k for k, e in self._entries.items() if e.expires_at <= now]
                for k in expired:
                    self._forget(k)
            if expired:
                logger.debug("Sweeper: xoá %s entry hết hạn.", len(expired))
