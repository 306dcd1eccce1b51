#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Lock độc quyền cho một thư mục output.

`fcntl.flock(LOCK_EX | LOCK_NB)` trên `<out>/.hsl.lock`: lần chạy thứ hai cùng
thư mục (khác process hay cùng process) nhận `False` ngay, không chờ. Lock tự
nhả khi process chết vì kernel đóng fd.

Không có `fcntl` (Windows) thì dùng `asyncio.Lock` theo từng đường dẫn, chỉ
chặn được trong cùng process.
"""

import asyncio
import logging
import os
from typing import IO, Dict, Optional

try:
    import fcntl
except ImportError:  # pragma: no cover - Windows
    fcntl = None

logger = logging.getLogger(__name__)

LOCK_FILE = ".hsl.lock"

_process_locks: Dict[str, asyncio.Lock] = {}


class OutputLock:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.path = os.path.abspath(os.path.join(out_dir, LOCK_FILE))
        self._fd: Optional[IO[str]] = None
        self._fallback: Optional[asyncio.Lock] = None

    @property
    def held(self) -> bool:
        return self._fd is not None or self._fallback is not None

    async def acquire(self) -> bool:
        if self.held:
            return True
        if fcntl is None:
            return await self._acquire_fallback()

        try:
            os.makedirs(self.out_dir, exist_ok=True)
            fd = open(self.path, "a", encoding="utf-8")
        except OSError as e:
            logger.warning("Không mở được lock file %s: %s", self.path, e)
            return False
        try:
            fcntl.flock(fd.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            fd.close()
            logger.warning("Thư mục %s đang được một lần chạy khác giữ.", self.out_dir)
            return False
        fd.truncate(0)
        fd.write(f"{os.getpid()}\n")
        fd.flush()
        self._fd = fd
        logger.debug("Giữ lock %s (pid %s).", self.path, os.getpid())
        return True

    async def _acquire_fallback(self) -> bool:
        lock = _process_locks.setdefault(self.path, asyncio.Lock())
        if lock.locked():
            logger.warning("Thư mục %s đang bị giữ trong process này.", self.out_dir)
            return False
        await lock.acquire()
        self._fallback = lock
        logger.warning("fcntl không khả dụng; lock %s chỉ có hiệu lực trong process.", self.path)
        return True

    async def release(self) -> None:
        if self._fd is not None:
            fd, self._fd = self._fd, None
            try:
                fd.close()
            except OSError as e:
                logger.warning("Không đóng được lock fd %s: %s", self.path, e)
            logger.debug("Đã nhả lock %s.", self.path)
        if self._fallback is not None:
            lock, self._fallback = self._fallback, None
            lock.release()
