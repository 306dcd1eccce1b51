#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Interface ledger backend.

Ledger ghi lại mỗi lần chạy (`experiments`) và mỗi file kết quả đã ghi
(`result_records`, tức ResultRecord: id thí nghiệm, thời điểm, config hash,
đường dẫn payload, digest kiểu git blob). Experiment đi qua các trạng thái
`running` → `ok` | `failed` | `interrupted`; `finish_experiment` ghi trạng thái
cuối cùng với summary JSON.
"""

import abc
from typing import Any, Dict, List, Optional


class BaseDatabase(abc.ABC):
    @abc.abstractmethod
    async def connect(self) -> None: ...

    @abc.abstractmethod
    async def close(self) -> None:
        """Đóng kết nối, nhả lock thư mục nếu còn giữ."""

    # ==================== Output-dir lock ====================

    @abc.abstractmethod
    async def acquire_output_lock(self) -> bool: ...

    @abc.abstractmethod
    async def release_output_lock(self) -> None: ...

    # ==================== Experiments ====================

    @abc.abstractmethod
    async def start_experiment(
        self, subcommand: str, config_hash: str, seed: int, config: Dict[str, Any]
    ) -> int: ...

    @abc.abstractmethod
    async def finish_experiment(
        self, experiment_id: int, status: str, summary: Optional[Dict[str, Any]] = None
    ) -> bool: ...

    @abc.abstractmethod
    async def get_experiment(self, experiment_id: int) -> Optional[Dict[str, Any]]: ...

    @abc.abstractmethod
    async def list_experiments(self, limit: int = 50) -> List[Dict[str, Any]]: ...

    # ==================== Result records ====================

    @abc.abstractmethod
    async def add_result_record(
        self, experiment_id: int, config_hash: str, payload_path: str, digest: str
    ) -> bool: ...

    @abc.abstractmethod
    async def get_result_records(self, experiment_id: int) -> List[Dict[str, Any]]: ...

    @abc.abstractmethod
    async def find_result_record(self, payload_path: str) -> Optional[Dict[str, Any]]: ...

