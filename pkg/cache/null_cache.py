#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Backend `none`: không giữ gì, mọi `get` đều MISS. Dùng khi cần đo thời gian tính thật."""

import logging
from typing import Any, Dict, Optional

from cache.base import BaseCache

logger = logging.getLogger(__name__)


class NullCache(BaseCache):
    def __init__(self):
        self.misses = 0

    async def connect(self):
        logger.info("Cache đã tắt (HSL_CACHE_BACKEND=none), mọi kết quả được tính lại.")

    async def close(self):
        logger.debug("Cache tắt: %s lần tính lại.", self.misses)

    async def get(self, key: str) -> Optional[Dict[str, Any]]:
        self.misses += 1
        return None

    async def set(self, key: str, value: Any, ttl: int = 3600):
        return None

    async def delete(self, key: str):
        return None

    async def clear_prefix(self, prefix: str, log_info: bool = True) -> int:
        return 0

    def stats(self) -> Dict[str, int]:
        return {"entries": 0, "hits": 0, "misses": self.misses, "evictions": 0}
