#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Các exception dùng chung cho toàn bộ tầng tính toán.

Mọi lỗi nghiệp vụ đều kế thừa `HslError` để handler bắt một lần và trả về
dict `{"success": False, "message": ...}`. Các lỗi về miền giá trị đồng thời
kế thừa `ValueError` để code gọi từ ngoài vẫn bắt được theo thói quen cũ.
"""

from typing import Optional


class HslError(Exception):
    """Lỗi gốc của thư viện."""


class DomainError(HslError, ValueError):
    """Tham số nằm ngoài miền xác định (d < 2, |t| > 1, q < 2, ...)."""


class BudgetError(HslError):
    """Vượt ngân sách tính toán đã cấu hình."""


class QuadratureBudgetError(BudgetError):
    """Số node quadrature cần thiết vượt `HSL_MAX_QUADRATURE_NODES`."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"Cần {required} node quadrature nhưng ngân sách chỉ cho phép {budget}. "
            "Tăng HSL_MAX_QUADRATURE_NODES hoặc giảm ℓ / số mũ."
        )


class ConvergenceError(HslError):
    """Chuỗi / tích phân không hội tụ trong dung sai yêu cầu."""


class ChaosQuadratureError(ConvergenceError):
    """Gauss–Hermite với số node gấp đôi cho hệ số khác nhau quá dung sai."""


class NotSeriesParallelError(HslError):
    """Đồ thị không rút gọn được bằng series/parallel; cần dùng Monte Carlo."""


class TruncationError(HslError):
    """Phần đuôi chuỗi chaos chưa được chứng nhận nhỏ hơn dung sai."""


class FactorizationError(HslError):
    """Phân tích Cholesky thất bại kể cả sau khi tăng jitter tối đa."""


class GridDegreeError(HslError, ValueError):
    """Lưới cầu không đủ độ phân giải cho bậc ℓ được yêu cầu."""


class ConfigError(HslError, ValueError):
    """Lỗi cấu hình thí nghiệm, kèm vị trí (file:dòng:cột) hoặc tên trường."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
        field: Optional[str] = None,
    ):
        self.path = path
        self.line = line
        self.column = column
        self.field = field
        location = ""
        if path is not None and line is not None:
            location = f"{path}:{line}:{column or 0}: "
        elif path is not None:
            location = f"{path}: "
        if field is not None:
            location += f"[{field}] "
        super().__init__(f"{location}{message}")
