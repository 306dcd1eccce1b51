#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Ledger backend dùng SQLite (aiosqlite).

- File mặc định `<out>/ledger.db`, ghi đè bằng `HSL_SQLITE_PATH`.
- WAL mode, foreign key bật; schema tạo idempotent, phiên bản ghi trong
  `PRAGMA user_version`.
- `payload_path` UNIQUE: mỗi file kết quả có đúng 1 ResultRecord; ghi lại
  cùng file thì upsert digest + thời điểm + experiment.
- Lock thư mục output: xem `database/output_lock.py`.
"""

import json
import logging
import os
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import aiosqlite

from config.config import Config
from database.base import BaseDatabase
from database.output_lock import OutputLock
from utils.utils import canonical_json

logger = logging.getLogger(__name__)

LEDGER_FILE = "ledger.db"
SCHEMA_VERSION = 1

SCHEMA = """
CREATE TABLE IF NOT EXISTS experiments (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    subcommand TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    seed INTEGER NOT NULL,
    config TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'running',
    summary TEXT,
    started_at TEXT NOT NULL,
    finished_at TEXT
);

CREATE TABLE IF NOT EXISTS result_records (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    experiment_id INTEGER NOT NULL REFERENCES experiments(id),
    created_at TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    payload_path TEXT NOT NULL UNIQUE,
    digest TEXT NOT NULL
);

CREATE INDEX IF NOT EXISTS idx_records_experiment ON result_records(experiment_id);
CREATE INDEX IF NOT EXISTS idx_experiments_hash ON experiments(config_hash);
"""

UPSERT_RECORD = """
INSERT INTO result_records (experiment_id, created_at, config_hash, payload_path, digest)
VALUES (?, ?, ?, ?, ?)
ON CONFLICT(payload_path) DO UPDATE SET
    experiment_id = excluded.experiment_id,
    created_at = excluded.created_at,
    config_hash = excluded.config_hash,
    digest = excluded.digest
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load(raw: Optional[str]) -> Optional[Dict[str, Any]]:
    if not raw:
        return None
    try:
        return json.loads(raw)
    except ValueError:
        logger.warning("Cột JSON hỏng trong ledger, bỏ qua: %.60s", raw)
        return None


class SqliteBackend(BaseDatabase):
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.db_path = Config().SQLITE_PATH or os.path.join(out_dir, LEDGER_FILE)
        self.output_lock = OutputLock(out_dir)
        self._conn: Optional[aiosqlite.Connection] = None

    # ==================== Lifecycle ====================

    async def connect(self):
        if self._conn is not None:
            return
        os.makedirs(os.path.dirname(self.db_path) or ".", exist_ok=True)
        try:
            self._conn = await aiosqlite.connect(self.db_path)
            self._conn.row_factory = aiosqlite.Row
            await self._conn.execute("PRAGMA journal_mode=WAL")
            await self._conn.execute("PRAGMA foreign_keys=ON")
            await self._migrate()
        except Exception as e:
            logger.error("Không mở được ledger SQLite %s: %s", self.db_path, e)
            if self._conn is not None:
                await self._conn.close()
                self._conn = None
            raise
        logger.info("Ledger SQLite @ %s", self.db_path)

    async def close(self):
        await self.output_lock.release()
        if self._conn is not None:
            await self._conn.close()
            self._conn = None
            logger.debug("Đã đóng ledger %s.", self.db_path)

    async def _migrate(self) -> None:
        async with self._conn.execute("PRAGMA user_version") as cur:
            (version,) = await cur.fetchone()
        if version > SCHEMA_VERSION:
            raise RuntimeError(
                f"Ledger {self.db_path} có schema v{version}, mới hơn bản này hỗ trợ (v{SCHEMA_VERSION})."
            )
        await self._conn.executescript(SCHEMA)
        await self._conn.execute(f"PRAGMA user_version = {SCHEMA_VERSION}")
        await self._conn.commit()

    async def _rows(self, query: str, params: tuple = ()) -> List[Dict[str, Any]]:
        async with self._conn.execute(query, params) as cur:
            return [dict(r) for r in await cur.fetchall()]

    async def _row(self, query: str, params: tuple = ()) -> Optional[Dict[str, Any]]:
        rows = await self._rows(query, params)
        return rows[0] if rows else None

    # ==================== Output-dir lock ====================

    async def acquire_output_lock(self) -> bool:
        return await self.output_lock.acquire()

    async def release_output_lock(self) -> None:
        await self.output_lock.release()

    # ==================== Experiments ====================

    async def start_experiment(
        self, subcommand: str, config_hash: str, seed: int, config: Dict[str, Any]
    ) -> int:
        async with self._conn.execute(
            "INSERT INTO experiments (subcommand, config_hash, seed, config, started_at) "
            "VALUES (?, ?, ?, ?, ?)",
            (subcommand, config_hash, int(seed), canonical_json(config), _now()),
        ) as cur:
            experiment_id = int(cur.lastrowid)
        await self._conn.commit()
        logger.debug("Experiment #%s: %s (hash %s)", experiment_id, subcommand, config_hash[:12])
        return experiment_id

    async def finish_experiment(
        self, experiment_id: int, status: str, summary: Optional[Dict[str, Any]] = None
    ) -> bool:
        try:
            await self._conn.execute(
                "UPDATE experiments SET status = ?, summary = ?, finished_at = ? WHERE id = ?",
                (status, None if summary is None else canonical_json(summary), _now(), experiment_id),
            )
            await self._conn.commit()
        except aiosqlite.Error as e:
            logger.error("Không cập nhật được experiment #%s: %s", experiment_id, e)
            return False
        logger.info("Experiment #%s kết thúc: %s", experiment_id, status)
        return True

    async def get_experiment(self, experiment_id: int) -> Optional[Dict[str, Any]]:
        row = await self._row("SELECT * FROM experiments WHERE id = ?", (experiment_id,))
        if row is not None:
            row["config"] = _load(row["config"])
            row["summary"] = _load(row["summary"])
        return row

    async def list_experiments(self, limit: int = 50) -> List[Dict[str, Any]]:
        return await self._rows(
            "SELECT id, subcommand, config_hash, seed, status, started_at, finished_at "
            "FROM experiments ORDER BY id DESC LIMIT ?",
            (int(limit),),
        )

    # ==================== Result records ====================

    async def add_result_record(
        self, experiment_id: int, config_hash: str, payload_path: str, digest: str
    ) -> bool:
        try:
            await self._conn.execute(UPSERT_RECORD, (experiment_id, _now(), config_hash, payload_path, digest))
            await self._conn.commit()
        except aiosqlite.Error as e:
            logger.error("Không ghi được ResultRecord %s: %s", payload_path, e)
            return False
        logger.debug("ResultRecord %s = %s", payload_path, digest[:12])
        return True

    async def get_result_records(self, experiment_id: int) -> List[Dict[str, Any]]:
        return await self._rows(
            "SELECT * FROM result_records WHERE experiment_id = ? ORDER BY id", (experiment_id,)
        )

    async def find_result_record(self, payload_path: str) -> Optional[Dict[str, Any]]:
        return await self._row("SELECT * FROM result_records WHERE payload_path = ?", (payload_path,))
