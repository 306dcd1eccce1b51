#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Facade ledger: chọn backend theo `Config.STORAGE_BACKEND` (hiện chỉ `sqlite`).

Ngoài các thao tác ghi/đọc, facade có `check_records`: tính lại digest của
mọi file một experiment đã ghi và so với ledger, để biết output trên đĩa
còn đúng là output đã đăng ký hay không.
"""

import asyncio
import logging
import os
from typing import Any, Dict, List, Optional

from config.config import Config
from database.base import BaseDatabase
from database.sqlite_backend import SqliteBackend
from utils.utils import file_digest

logger = logging.getLogger(__name__)


class DatabaseManager:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.backend: BaseDatabase = self._build_backend(Config().STORAGE_BACKEND)

    def _build_backend(self, name: str) -> BaseDatabase:
        if name == "sqlite":
            return SqliteBackend(self.out_dir)
        raise ValueError(f"STORAGE_BACKEND không hợp lệ: {name}")

    # ==================== Lifecycle ====================

    async def connect(self):
        await self.backend.connect()

    async def close(self):
        await self.backend.close()

    # ==================== Output-dir lock ====================

    async def acquire_output_lock(self) -> bool:
        return await self.backend.acquire_output_lock()

    async def release_output_lock(self) -> None:
        await self.backend.release_output_lock()

    # ==================== Experiments ====================

    async def start_experiment(
        self, subcommand: str, config_hash: str, seed: int, config: Dict[str, Any]
    ) -> int:
        return await self.backend.start_experiment(subcommand, config_hash, seed, config)

    async def finish_experiment(
        self, experiment_id: int, status: str, summary: Optional[Dict[str, Any]] = None
    ) -> bool:
        return await self.backend.finish_experiment(experiment_id, status, summary)

    async def get_experiment(self, experiment_id: int) -> Optional[Dict[str, Any]]:
        return await self.backend.get_experiment(experiment_id)

    async def list_experiments(self, limit: int = 50) -> List[Dict[str, Any]]:
        return await self.backend.list_experiments(limit)

    # ==================== Result records ====================

    async def add_result_record(
        self, experiment_id: int, config_hash: str, payload_path: str, digest: str
    ) -> bool:
        return await self.backend.add_result_record(experiment_id, config_hash, payload_path, digest)

    async def get_result_records(self, experiment_id: int) -> List[Dict[str, Any]]:
        return await self.backend.get_result_records(experiment_id)

    async def find_result_record(self, payload_path: str) -> Optional[Dict[str, Any]]:
        return await self.backend.find_result_record(payload_path)

    async def check_records(self, experiment_id: int) -> List[Dict[str, Any]]:
        """Các record không khớp đĩa, mỗi phần tử có `payload_path` và `problem`
        (`missing` hoặc `changed`, kèm `actual`). Danh sách rỗng nghĩa là khớp hết."""
        problems = []
        for record in await self.backend.get_result_records(experiment_id):
            path = record["payload_path"]
            if not os.path.isfile(path):
                problems.append({"payload_path": path, "problem": "missing"})
                continue
            actual = await asyncio.to_thread(file_digest, path)
            if actual != record["digest"]:
                problems.append({"payload_path": path, "problem": "changed", "actual": actual})
        if problems:
            logger.warning("Experiment #%s: %s file không khớp ledger.", experiment_id, len(problems))
        return problems
