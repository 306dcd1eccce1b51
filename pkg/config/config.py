#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Cấu hình cấp tiến trình: log, cache, ledger và ngân sách tính toán.

Mọi biến môi trường có tiền tố `HSL_` và có thể đặt trong `.env`. Tham số
thí nghiệm (ℓ, φ, reps, seed, ...) nằm ở `config/experiment.py`.

- HSL_CACHE_BACKEND để trống → `memory`; `none` tắt cache.
- HSL_SQLITE_PATH để trống → ledger ở `<out>/ledger.db`.

`Config` là singleton, chỉ đọc env và log một lần; test gọi `Config.reset()`.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# (thuộc tính, mặc định, giá trị nhỏ nhất cho phép)
INT_SETTINGS = (
    ("CACHE_TTL", 3600, 0),
    ("CACHE_MAX_ENTRIES", 256, 1),
    ("MAX_QUADRATURE_NODES", 20000, 1),
    ("MAX_GRID_NODES", 2000, 1),
    ("DENSE_NODE_BUDGET", 600, 1),
    ("WICK_BUDGET", 24, 1),
)
CHOICES = {
    "CACHE_BACKEND": ("memory", "none"),
    "STORAGE_BACKEND": ("sqlite",),
}


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} phải là số nguyên, nhận được {raw!r}.")


class Config:
    _instance: "Config | None" = None
    _initialized: bool = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if Config._initialized:
            return
        Config._initialized = True

        if Path(".env").exists():
            load_dotenv()

        self.LOG_LEVEL = os.getenv("HSL_LOG_LEVEL", "INFO").upper()
        self.CACHE_BACKEND = os.getenv("HSL_CACHE_BACKEND", "").strip().lower() or CHOICES["CACHE_BACKEND"][0]
        self.STORAGE_BACKEND = os.getenv("HSL_STORAGE_BACKEND", "").strip().lower() or CHOICES["STORAGE_BACKEND"][0]
        self.SQLITE_PATH = os.getenv("HSL_SQLITE_PATH", "").strip()
        for attr, default, _ in INT_SETTINGS:
            setattr(self, attr, _int_env(f"HSL_{attr}", default))

        self._validate_config()

    @classmethod
    def reset(cls) -> None:
        """Bỏ instance đã cache để lần gọi `Config()` kế tiếp đọc lại env."""
        cls._instance = None
        cls._initialized = False

    def as_dict(self) -> Dict[str, Any]:
        keys = ["LOG_LEVEL", "CACHE_BACKEND", "STORAGE_BACKEND", "SQLITE_PATH"]
        keys += [attr for attr, _, _ in INT_SETTINGS]
        return {k: getattr(self, k) for k in keys}

    def _validate_config(self):
        for attr, allowed in CHOICES.items():
            value = getattr(self, attr)
            if value not in allowed:
                raise ValueError(
                    f"HSL_{attr} không hợp lệ: {value!r}. Chấp nhận: {', '.join(map(repr, allowed))}."
                )
        for attr, _, minimum in INT_SETTINGS:
            value = getattr(self, attr)
            if value < minimum:
                raise ValueError(f"HSL_{attr} phải ≥ {minimum}, nhận được {value}.")

        logger.info("Storage backend: sqlite @ %s", self.SQLITE_PATH or "<out>/ledger.db")
        logger.info(
            "Cache backend:   %s",
            f"in-memory, tối đa {self.CACHE_MAX_ENTRIES} entry" if self.CACHE_BACKEND == "memory" else "tắt",
        )
        logger.debug("Config tiến trình: %s", self.as_dict())
