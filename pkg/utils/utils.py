#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Hàm tiện ích dùng chung: digest, JSON chuẩn hoá, ghi CSV/JSONL.
"""

import csv
import hashlib
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def git_blob_digest(content: bytes) -> str:
    """Digest kiểu `git hash-object`: sha1(b"blob <len>\\0" + content)."""
    header = f"blob {len(content)}\0".encode("ascii")
    return hashlib.sha1(header + content).hexdigest()


def file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return git_blob_digest(fh.read())


def to_jsonable(value: Any) -> Any:
    """Chuyển kiểu numpy / tuple / NaN về kiểu JSON thuần (NaN, ±inf → None)."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else None
    return value


def canonical_json(value: Any) -> str:
    """JSON chuẩn hoá: sort key, separator gọn, không escape unicode."""
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_csv(path: str, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    """Ghi CSV (RFC-4180, `\\r\\n`). Cột lấy theo thứ tự xuất hiện nếu không chỉ định."""
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
    logger.debug("Đã ghi %s dòng CSV → %s", len(rows), path)
    return path


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (dict, list, tuple)):
        return canonical_json(value)
    return to_jsonable(value)


def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> str:
    """Mỗi record 1 dòng JSON chuẩn hoá."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(canonical_json(record))
            fh.write("\n")
            count += 1
    logger.debug("Đã ghi %s record JSONL → %s", count, path)
    return path


def write_json(path: str, value: Any) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(to_jsonable(value), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def parse_int_list(raw: str) -> List[int]:
    """'8,16,32' → [8, 16, 32]. Raise ValueError nếu có phần tử không phải số nguyên."""
    items = [part.strip() for part in raw.split(",") if part.strip()]
    if not items:
        raise ValueError(f"Danh sách rỗng: {raw!r}")
    try:
        return [int(part) for part in items]
    except ValueError:
        raise ValueError(f"Danh sách số nguyên không hợp lệ: {raw!r}")
