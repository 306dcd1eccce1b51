#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import json
import os
from pathlib import Path

import pytest

from config.config import Config

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """Mỗi test chạy trong thư mục tạm, không có biến HSL_* và Config đọc lại từ đầu."""
    for name in list(os.environ):
        if name.startswith("HSL_"):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    Config.reset()
    yield
    Config.reset()


@pytest.fixture
def golden():
    def load(name: str):
        return json.loads((GOLDEN_DIR / name).read_text(encoding="utf-8"))
    return load
