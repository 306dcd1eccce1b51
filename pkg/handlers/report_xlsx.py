#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Workbook xlsx cho một lần chạy (`--xlsx`): mỗi bảng CSV đã ghi thành một sheet.

- Dòng 1: tiêu đề gộp ô; dòng 2: header (đóng băng, có autofilter).
- Số thực hiển thị dạng khoa học 6 chữ số; dict/list thành JSON chuẩn hoá.
- Dòng không đạt (`status` = fail/error, hoặc một cờ kiểm tra = False) tô đỏ.

CSV vẫn là định dạng chính và là thứ được so digest; workbook chỉ để đọc.
"""

import io
import logging
import math
from typing import Any, Dict, Iterable, List

import openpyxl
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter
from openpyxl.worksheet.worksheet import Worksheet

from utils.utils import canonical_json

logger = logging.getLogger(__name__)

MAX_SHEET_TITLE = 31
MAX_ROWS = 100_000
FLOAT_FORMAT = "0.000000E+00"
FAILED_STATUSES = {"fail", "error"}
CHECK_FLAGS = ("equal", "mc_ok", "passed")

TITLE_FONT = Font(name="Arial", size=14, bold=True)
HEADER_FONT = Font(name="Arial", size=11, bold=True, color="FFFFFF")
BODY_FONT = Font(name="Arial", size=10)
HEADER_FILL = PatternFill(fill_type="solid", start_color="4F81BD", end_color="4F81BD")
FAILED_FILL = PatternFill(fill_type="solid", start_color="F4CCCC", end_color="F4CCCC")
CENTER = Alignment(horizontal="center", vertical="center", wrap_text=True)
THIN = Side(style="thin")
GRID = Border(left=THIN, right=THIN, top=THIN, bottom=THIN)


def _cell_value(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (dict, list, tuple)):
        return canonical_json(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _columns(rows: Iterable[Dict[str, Any]]) -> List[str]:
    seen: Dict[str, None] = {}
    for row in rows:
        seen.update(dict.fromkeys(row))
    return list(seen)


def _failed(row: Dict[str, Any]) -> bool:
    if row.get("status") in FAILED_STATUSES:
        return True
    return any(row.get(flag) is False for flag in CHECK_FLAGS)


def _fill_sheet(ws: Worksheet, title: str, rows: List[Dict[str, Any]]) -> int:
    """Ghi một bảng vào sheet, trả về số dòng bị tô đỏ."""
    columns = _columns(rows) or ["(trống)"]
    ws.merge_cells(start_row=1, start_column=1, end_row=1, end_column=len(columns))
    head = ws.cell(row=1, column=1, value=title)
    head.font = TITLE_FONT
    head.alignment = CENTER

    for col, name in enumerate(columns, 1):
        c = ws.cell(row=2, column=col, value=name)
        c.font, c.fill, c.alignment, c.border = HEADER_FONT, HEADER_FILL, CENTER, GRID
        ws.column_dimensions[get_column_letter(col)].width = max(10, min(40, len(name) + 4))

    if len(rows) > MAX_ROWS:
        logger.warning("Sheet %s: %s dòng, chỉ xuất %s dòng đầu.", ws.title, len(rows), MAX_ROWS)
    failed = 0
    for r, row in enumerate(rows[:MAX_ROWS], 3):
        bad = _failed(row)
        failed += bad
        for col, name in enumerate(columns, 1):
            value = _cell_value(row.get(name))
            c = ws.cell(row=r, column=col, value=value)
            c.font, c.border = BODY_FONT, GRID
            if isinstance(value, float):
                c.number_format = FLOAT_FORMAT
            if bad:
                c.fill = FAILED_FILL

    ws.freeze_panes = "A3"
    if rows:
        ws.auto_filter.ref = f"A2:{get_column_letter(len(columns))}{min(len(rows), MAX_ROWS) + 2}"
    return failed


def generate_report_xlsx(title: str, tables: Dict[str, List[Dict[str, Any]]]) -> bytes:
    wb = openpyxl.Workbook()
    wb.remove(wb.active)
    for name, rows in tables.items():
        ws = wb.create_sheet(title=name[:MAX_SHEET_TITLE])
        failed = _fill_sheet(ws, f"{title}: {name}", rows)
        if failed:
            logger.info("Sheet %s có %s dòng không đạt.", ws.title, failed)
    if not wb.sheetnames:
        wb.create_sheet(title="summary")

    buf = io.BytesIO()
    wb.save(buf)
    return buf.getvalue()
