#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Kho bảng số đã tính trong một tiến trình: hệ số chaos, bảng moment ∫G^q,
batch Monte Carlo, kết quả 𝔍 và Gaunt.

Key là `<loại bảng>:<tham số xác định nó>`, vd `moments:2:8,16:6` hay
`batch:2:64:<spec_hash>:2000:12345:...`; cùng key phải cho cùng bảng, nên
seed và mọi tham số ảnh hưởng kết quả đều nằm trong key. Giá trị lưu dạng
`{timestamp, data}`; `data` là object Python (ndarray, dataclass), không serialize.
"""

import abc
from typing import Any, Dict, Optional


class BaseCache(abc.ABC):

    @abc.abstractmethod
    async def connect(self) -> None: ...

    @abc.abstractmethod
    async def close(self) -> None: ...

    @abc.abstractmethod
    async def get(self, key: str) -> Optional[Dict[str, Any]]:
        """`{timestamp, data}` của bảng, hoặc None nếu chưa tính hay đã hết hạn."""

    @abc.abstractmethod
    async def set(self, key: str, value: Any, ttl: int = 3600) -> None: ...

    @abc.abstractmethod
    async def delete(self, key: str) -> None: ...

    @abc.abstractmethod
    async def clear_prefix(self, prefix: str, log_info: bool = True) -> int:
        """Bỏ mọi bảng có key bắt đầu bằng `prefix` (vd `batch:2:`), trả về số bảng đã bỏ."""

    def stats(self) -> Dict[str, int]:
        """Bộ đếm hit/miss/eviction cho tổng kết run; backend không đếm thì trả {}."""
        return {}
