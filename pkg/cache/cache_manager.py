#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Facade cache: chọn backend theo `Config.CACHE_BACKEND` (`memory` | `none`).

Handler gần như chỉ dùng `get_or_compute`: HIT thì trả ngay, MISS thì chạy hàm
tính (đồng bộ, nặng CPU) trong thread qua `asyncio.to_thread` rồi lưu lại.
Hai coroutine cùng hỏi một key đang được tính sẽ chờ chung một kết quả thay
vì tính hai lần.
"""

import asyncio
import logging
from typing import Any, Callable, Dict, Optional

from cache.base import BaseCache
from cache.memory_cache import MemoryCache
from cache.null_cache import NullCache
from config.config import Config

logger = logging.getLogger(__name__)


class CacheManager:
    def __init__(self):
        self.config = Config()
        self.ttl = self.config.CACHE_TTL
        self.backend: BaseCache = self._build_backend()
        self._pending: Dict[str, asyncio.Future] = {}

    def _build_backend(self) -> BaseCache:
        if self.config.CACHE_BACKEND == "memory":
            return MemoryCache(self.config.CACHE_MAX_ENTRIES)
        if self.config.CACHE_BACKEND == "none":
            return NullCache()
        raise ValueError(f"CACHE_BACKEND không hợp lệ: {self.config.CACHE_BACKEND}")

    async def connect(self):
        await self.backend.connect()

    async def close(self):
        await self.backend.close()

    async def get(self, key: str) -> Optional[Dict[str, Any]]:
        return await self.backend.get(key)

    async def set(self, key: str, value: Any, ttl: Optional[int] = None):
        await self.backend.set(key, value, self.ttl if ttl is None else ttl)

    async def delete(self, key: str):
        await self.backend.delete(key)

    async def clear_prefix(self, prefix: str, log_info: bool = True) -> int:
        return await self.backend.clear_prefix(prefix, log_info)

    def stats(self) -> Dict[str, int]:
        return self.backend.stats()

    async def get_or_compute(self, key: str, build: Callable[..., Any], *args, **kwargs) -> Any:
        """Giá trị của `key`; MISS thì tính `build(*args, **kwargs)` trong thread và lưu lại."""
        hit = await self.backend.get(key)
        if hit is not None:
            return hit["data"]
        pending = self._pending.get(key)
        if pending is not None:
            logger.debug("Chờ kết quả đang tính cho %s", key)
            return await asyncio.shield(pending)

        future = asyncio.get_running_loop().create_future()
        self._pending[key] = future
        try:
            value = await asyncio.to_thread(build, *args, **kwargs)
            await self.set(key, value)
        except asyncio.CancelledError:
            future.cancel()
            raise
        except Exception as e:
            future.set_exception(e)
            # đánh dấu đã đọc để asyncio không cảnh báo khi không ai chờ
            future.exception()
            raise
        else:
            future.set_result(value)
            return value
        finally:
            self._pending.pop(key, None)
