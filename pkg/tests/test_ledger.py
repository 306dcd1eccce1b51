#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import asyncio
import os
import sqlite3

import pytest

from config.config import Config
from database.db_manager import DatabaseManager
from database.output_lock import OutputLock
from database.sqlite_backend import SCHEMA_VERSION
from utils.utils import file_digest


def test_experiment_lifecycle(tmp_path):
    out = str(tmp_path / "out")

    async def scenario():
        db = DatabaseManager(out)
        await db.connect()
        try:
            exp_id = await db.start_experiment("moments", "ab" * 32, 12345, {"d": 2, "ell_list": [8]})
            row = await db.get_experiment(exp_id)
            assert row["status"] == "running"
            assert row["config"] == {"d": 2, "ell_list": [8]}
            assert row["summary"] is None

            assert await db.finish_experiment(exp_id, "ok", {"records": 1})
            row = await db.get_experiment(exp_id)
            assert row["status"] == "ok"
            assert row["summary"] == {"records": 1}
            assert row["finished_at"]

            second = await db.start_experiment("simulate", "cd" * 32, 1, {})
            listed = await db.list_experiments()
            assert [r["id"] for r in listed] == [second, exp_id]
            assert await db.get_experiment(999) is None
        finally:
            await db.close()

    asyncio.run(scenario())
    assert os.path.exists(os.path.join(out, "ledger.db"))


def test_result_record_upsert(tmp_path):
    async def scenario():
        db = DatabaseManager(str(tmp_path))
        await db.connect()
        try:
            exp_id = await db.start_experiment("moments", "h", 1, {})
            assert await db.add_result_record(exp_id, "h", "moments.csv", "1" * 40)
            assert await db.add_result_record(exp_id, "h", "moments.csv", "2" * 40)
            assert await db.add_result_record(exp_id, "h", "moments.jsonl", "3" * 40)
            records = await db.get_result_records(exp_id)
            assert [r["payload_path"] for r in records] == ["moments.csv", "moments.jsonl"]
            found = await db.find_result_record("moments.csv")
            assert found["digest"] == "2" * 40
            assert await db.find_result_record("missing.csv") is None
        finally:
            await db.close()

    asyncio.run(scenario())


def test_output_lock_is_exclusive(tmp_path):
    out = str(tmp_path / "locked")

    async def scenario():
        first = DatabaseManager(out)
        second = DatabaseManager(out)
        assert await first.acquire_output_lock()
        assert await first.acquire_output_lock()
        assert not await second.acquire_output_lock()
        await first.release_output_lock()
        assert await second.acquire_output_lock()
        await second.release_output_lock()

    asyncio.run(scenario())


def test_sqlite_path_override(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere" / "runs.db"
    monkeypatch.setenv("HSL_SQLITE_PATH", str(target))
    Config.reset()

    async def scenario():
        db = DatabaseManager(str(tmp_path / "out"))
        await db.connect()
        await db.close()

    asyncio.run(scenario())
    assert target.exists()


def test_check_records_detects_drift(tmp_path):
    out = str(tmp_path)
    kept = tmp_path / "kept.csv"
    edited = tmp_path / "edited.csv"
    gone = tmp_path / "gone.csv"
    for path in (kept, edited, gone):
        path.write_text("ell,value\r\n8,1\r\n", encoding="utf-8")

    async def scenario():
        db = DatabaseManager(out)
        await db.connect()
        try:
            exp_id = await db.start_experiment("moments", "h", 1, {})
            for path in (kept, edited, gone):
                await db.add_result_record(exp_id, "h", str(path), file_digest(str(path)))
            assert await db.check_records(exp_id) == []

            edited.write_text("ell,value\r\n8,2\r\n", encoding="utf-8")
            gone.unlink()
            return await db.check_records(exp_id)
        finally:
            await db.close()

    problems = asyncio.run(scenario())
    assert problems == [
        {"payload_path": str(edited), "problem": "changed", "actual": file_digest(str(edited))},
        {"payload_path": str(gone), "problem": "missing"},
    ]


def test_ledger_records_schema_version(tmp_path):
    async def scenario():
        db = DatabaseManager(str(tmp_path))
        await db.connect()
        await db.close()

    asyncio.run(scenario())
    conn = sqlite3.connect(tmp_path / "ledger.db")
    try:
        assert conn.execute("PRAGMA user_version").fetchone()[0] == SCHEMA_VERSION
    finally:
        conn.close()


def test_newer_ledger_is_refused(tmp_path):
    conn = sqlite3.connect(tmp_path / "ledger.db")
    conn.execute(f"PRAGMA user_version = {SCHEMA_VERSION + 1}")
    conn.close()

    async def scenario():
        db = DatabaseManager(str(tmp_path))
        with pytest.raises(RuntimeError):
            await db.connect()

    asyncio.run(scenario())


def test_lock_file_names_holder(tmp_path):
    async def scenario():
        lock = OutputLock(str(tmp_path))
        assert await lock.acquire()
        assert lock.held
        with open(lock.path, encoding="utf-8") as fh:
            assert fh.read().strip() == str(os.getpid())
        await lock.release()
        assert not lock.held

    asyncio.run(scenario())
