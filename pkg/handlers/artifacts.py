#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Ghi file kết quả của một lần chạy và đăng ký từng file vào ledger.

Mọi file nằm trong `<out>/<subcommand>/`. Mỗi file ghi xong được tính digest
kiểu git blob và thêm đúng một ResultRecord. Bảng nào cũng được giữ lại để
cuối lần chạy dựng workbook xlsx nếu `write_xlsx` bật.

`RunContext` gom những thứ mọi handler cần: config thí nghiệm, cache, writer
và cờ dừng (SIGINT/SIGTERM).
"""

import asyncio
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from config.experiment import ExperimentConfig
from utils.utils import file_digest, write_csv, write_json, write_jsonl

logger = logging.getLogger(__name__)


class RunInterrupted(Exception):
    """Lần chạy bị dừng bởi tín hiệu; file đã ghi vẫn được giữ."""


class ArtifactWriter:
    def __init__(self, db_manager, experiment_id: int, config_hash: str, out_dir: str, subcommand: str):
        self.db_manager = db_manager
        self.experiment_id = experiment_id
        self.config_hash = config_hash
        self.directory = os.path.join(out_dir, subcommand)
        self.written: List[str] = []
        self.tables: Dict[str, List[Dict[str, Any]]] = {}

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)

    async def _register(self, path: str) -> str:
        digest = file_digest(path)
        ok = await self.db_manager.add_result_record(self.experiment_id, self.config_hash, path, digest)
        if not ok:
            logger.warning("Không ghi được ResultRecord cho %s", path)
        if path not in self.written:
            self.written.append(path)
        return path

    async def csv(self, name: str, rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
        path = write_csv(self.path(name), rows, columns)
        self.tables[os.path.splitext(name)[0]] = rows
        return await self._register(path)

    async def jsonl(self, name: str, records: Iterable[Dict[str, Any]]) -> str:
        return await self._register(write_jsonl(self.path(name), records))

    async def json(self, name: str, value: Any) -> str:
        return await self._register(write_json(self.path(name), value))

    async def raw(self, path: str) -> str:
        """Đăng ký file do code khác ghi (vd realization .bin)."""
        return await self._register(path)

    async def xlsx(self, name: str, content: bytes) -> str:
        path = self.path(name)
        os.makedirs(self.directory, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(content)
        return await self._register(path)


@dataclass
class RunContext:
    config: ExperimentConfig
    cache_manager: Any
    writer: ArtifactWriter
    stop_event: asyncio.Event = field(default_factory=asyncio.Event)

    def checkpoint(self) -> None:
        """Gọi giữa các bước tính; raise RunInterrupted nếu đã nhận tín hiệu dừng."""
        if self.stop_event.is_set():
            raise RunInterrupted("Đã nhận tín hiệu dừng.")
