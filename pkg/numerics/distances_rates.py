#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Khoảng cách từ phân phối thực nghiệm tới N(0, 1) và hồi quy tốc độ log-log.

- `wasserstein1_to_gauss`: W1 chính xác, tích phân từng đoạn giữa các thống kê thứ tự
  với nguyên hàm dạng đóng A(x) = xΦ(x) + φ(x).
- `smoothed_tv_to_gauss`: proxy TV làm trơn cùng nhân Gauss (TV thật giữa độ đo
  thực nghiệm và luật liên tục luôn bằng 1 nên không dùng được).
- `rate_fit`: OLS trên (log ℓ, log y).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from numerics.errors import DomainError
from utils.rng import stream

logger = logging.getLogger(__name__)

TV_WINDOW = 6.0
_TV_CHUNK = 4096
_MIN_FIT_POINTS = 4
# Khoá luồng RNG dành riêng cho bootstrap
_BOOTSTRAP_KEY = 0xB007


# ==================== Wasserstein-1 ====================

def _antiderivative_cdf(x: np.ndarray) -> np.ndarray:
    """A(x) = ∫_{−∞}^{x} Φ(s) ds = xΦ(x) + φ(x)."""
    return x * special.ndtr(x) + stats.norm.pdf(x)


def _antiderivative_sf(x: np.ndarray) -> np.ndarray:
    """B(x) = ∫_{x}^{∞} (1 − Φ(s)) ds = φ(x) − x(1 − Φ(x))."""
    return stats.norm.pdf(x) - x * special.ndtr(-x)


def wasserstein1_to_gauss(sample: Sequence[float]) -> float:
    """∫ |F_n(x) − Φ(x)| dx chính xác (không rời rạc hoá trục x)."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise DomainError(f"Cần ít nhất 2 mẫu, nhận được {n}.")
    if not np.all(np.isfinite(x)):
        raise DomainError("Mẫu chứa giá trị không hữu hạn.")

    total = float(_antiderivative_cdf(x[:1])[0] + _antiderivative_sf(x[-1:])[0])
    a, b = x[:-1], x[1:]
    level = np.arange(1, n) / n
    # Φ cắt mức i/n tại z; kẹp z vào [a, b] để một công thức phủ mọi trường hợp
    z = np.clip(special.ndtri(level), a, b)
    A_a, A_b, A_z = _antiderivative_cdf(a), _antiderivative_cdf(b), _antiderivative_cdf(z)
    inner = level * (z - a) - (A_z - A_a) + (A_b - A_z) - level * (b - z)
    total += float(np.sum(inner))
    return total


# ==================== Proxy TV làm trơn ====================

def silverman_bandwidth(n: int) -> float:
    """h = 1.06·n^{−1/5} cho mẫu phương sai đơn vị."""
    if n < 1:
        raise DomainError(f"n phải ≥ 1, nhận được {n}.")
    return 1.06 * n ** (-0.2)


def smoothed_tv_to_gauss(sample: Sequence[float], bandwidth: Optional[float] = None) -> float:
    """½∫|f̂_h − φ⋆K_h| trên [−6, 6]; f̂_h là KDE nhân Gauss, đích là N(0, 1 + h²)."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 1:
        raise DomainError("Mẫu rỗng.")
    if not np.all(np.isfinite(x)):
        raise DomainError("Mẫu chứa giá trị không hữu hạn.")
    h = silverman_bandwidth(x.size) if bandwidth is None else float(bandwidth)
    if h <= 0.0:
        raise DomainError(f"Bandwidth phải dương, nhận được h={h}.")

    n_grid = int(math.ceil(2.0 * TV_WINDOW / (h / 5.0))) + 1
    grid = np.linspace(-TV_WINDOW, TV_WINDOW, n_grid)
    density = np.zeros(n_grid)
    for start in range(0, x.size, _TV_CHUNK):
        chunk = x[start:start + _TV_CHUNK]
        density += stats.norm.pdf((grid[:, None] - chunk[None, :]) / h).sum(axis=1)
    density /= x.size * h
    target = stats.norm.pdf(grid, scale=math.sqrt(1.0 + h * h))
    value = 0.5 * float(integrate.trapezoid(np.abs(density - target), grid))
    return min(max(value, 0.0), 1.0)


# ==================== Chuỗi tốc độ ====================

_THEORY = {
    "w1_xtilde": lambda d: -0.5,
    "tv_xtilde": lambda d: -0.5,
    "w1_sigma": lambda d: -0.5 if d <= 3 else (-0.75 if d == 4 else -1.0),
    "var_sigma": lambda d: -1.0 if d == 2 else -(d - 1) / 2.0,
}


def theory_slope(statistic: str, d: int) -> float:
    """Số mũ tốc độ lý thuyết của thống kê theo ℓ."""
    if statistic not in _THEORY:
        raise DomainError(f"Không có tốc độ lý thuyết cho {statistic!r}. Chọn trong {sorted(_THEORY)}.")
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    return float(_THEORY[statistic](d))


@dataclass
class RateSeries:
    statistic: str
    d: int
    ell: List[int] = field(default_factory=list)
    y: List[float] = field(default_factory=list)
    y_err: List[float] = field(default_factory=list)
    slope: Optional[float] = None
    intercept: Optional[float] = None
    slope_se: Optional[float] = None
    theory_slope: Optional[float] = None

    def add(self, ell: int, y: float, y_err: float = float("nan")) -> None:
        if self.ell and ell <= self.ell[-1]:
            raise DomainError(f"ℓ phải tăng ngặt: {ell} sau {self.ell[-1]}.")
        self.ell.append(int(ell))
        self.y.append(float(y))
        self.y_err.append(float(y_err))

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {"ell": e, "y": y, "y_err": err}
            for e, y, err in zip(self.ell, self.y, self.y_err)
        ]

    def to_json(self) -> Dict[str, Any]:
        return {
            "statistic": self.statistic,
            "d": self.d,
            "points": self.to_rows(),
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_se": self.slope_se,
            "theory_slope": self.theory_slope,
        }


def rate_fit(series: RateSeries) -> RateSeries:
    """OLS của log y theo log ℓ; ghi slope/intercept/slope_se vào `series` và trả lại nó."""
    ell = np.asarray(series.ell, dtype=float)
    y = np.asarray(series.y, dtype=float)
    if ell.size < _MIN_FIT_POINTS:
        raise DomainError(f"Cần ít nhất {_MIN_FIT_POINTS} điểm để fit, có {ell.size}.")
    if np.any(np.diff(ell) <= 0):
        raise DomainError("ℓ phải tăng ngặt.")
    if np.any(~np.isfinite(y)) or np.any(y <= 0.0):
        raise DomainError(f"Fit log-log cần y > 0, nhận được {series.y}.")
    fit = stats.linregress(np.log(ell), np.log(y))
    series.slope = float(fit.slope)
    series.intercept = float(fit.intercept)
    series.slope_se = float(fit.stderr)
    if series.theory_slope is None and series.statistic in _THEORY:
        series.theory_slope = theory_slope(series.statistic, series.d)
    logger.info(
        "Fit %s (d=%s): slope %.4f ± %.4f (lý thuyết %s)",
        series.statistic, series.d, series.slope, series.slope_se, series.theory_slope,
    )
    return series


def bootstrap_se(
    sample: Sequence[float],
    statistic: Callable[[np.ndarray], float],
    B: int = 200,
    seed: int = 0,
) -> float:
    """Sai số chuẩn bootstrap của `statistic(sample)` với B lần lấy lại có hoàn lại."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise DomainError("Bootstrap cần ít nhất 2 mẫu.")
    if B < 2:
        raise DomainError(f"B phải ≥ 2, nhận được {B}.")
    rng = stream(seed, _BOOTSTRAP_KEY)
    values = np.empty(B)
    for b in range(B):
        values[b] = statistic(x[rng.integers(0, x.size, size=x.size)])
    return float(np.std(values, ddof=1))
