#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Logging cho bộ công cụ.

- Console: stderr (stdout dành cho `config`), plain text hoặc JSON theo `HSL_LOG_JSON`.
- Run log: mỗi lần chạy subcommand ghi thêm `<out>/<subcommand>/run.log`
  dạng JSON lines, mọi dòng mang nhãn `run` = `<subcommand>#<experiment id>`.

Console lấy nhãn run từ một ContextVar (đi theo `asyncio.to_thread`); file
run log gắn nhãn cố định nên cả log từ thread pool của mô phỏng cũng có nhãn.
"""

import contextvars
import json
import logging
import os
import sys
from datetime import datetime, timezone
from typing import Optional

PLAIN_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
QUIET_LIBRARIES = ("aiosqlite", "numexpr", "matplotlib")

_run_tag: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("hsl_run_tag", default=None)


class RunTagFilter(logging.Filter):
    """Gắn `record.run`: nhãn cố định nếu có, không thì lấy từ ContextVar. Không chặn record nào."""

    def __init__(self, tag: Optional[str] = None):
        super().__init__()
        self.tag = tag

    def filter(self, record: logging.LogRecord) -> bool:
        record.run = self.tag or _run_tag.get()
        return True


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        run = getattr(record, "run", None)
        if run:
            payload["run"] = run
        if record.threadName and record.threadName != "MainThread":
            payload["thread"] = record.threadName
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False)


def _parse_bool_env(value: Optional[str], default: bool = False) -> bool:
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "on"}


def setup_logging(level_override: Optional[str] = None) -> None:
    """Cấu hình root logger theo HSL_LOG_LEVEL / HSL_LOG_JSON.

    Gọi ở đầu `hsl.py`; gọi lại với `level_override` (cờ `--log-level`) thì thay
    handler console cũ. Handler run log đang gắn (nếu có) được giữ nguyên.
    """
    level_name = (level_override or os.getenv("HSL_LOG_LEVEL", "INFO")).upper()
    level = getattr(logging, level_name, logging.INFO)

    console = logging.StreamHandler(sys.stderr)
    console.addFilter(RunTagFilter())
    if _parse_bool_env(os.getenv("HSL_LOG_JSON")):
        console.setFormatter(JsonFormatter())
    else:
        console.setFormatter(logging.Formatter(PLAIN_FORMAT))

    root = logging.getLogger()
    for h in list(root.handlers):
        if not isinstance(h, logging.FileHandler):
            root.removeHandler(h)
    root.setLevel(level)
    root.addHandler(console)

    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(logging.WARNING)


def attach_run_log(path: str, tag: str) -> logging.Handler:
    """Mở run log JSON lines tại `path` và đặt nhãn run cho context hiện tại."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.addFilter(RunTagFilter(tag))
    handler.setFormatter(JsonFormatter())
    logging.getLogger().addHandler(handler)
    _run_tag.set(tag)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    logging.getLogger().removeHandler(handler)
    handler.close()
    _run_tag.set(None)
