#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Hằng số hình cầu, đa thức Gegenbauer chuẩn hoá G_{ℓ;d}(1) = 1 và quadrature 1 chiều.

Quy ước:
- μ_k là diện tích mặt cầu S^k: μ_k = 2π^{(k+1)/2} / Γ((k+1)/2).
- G_{ℓ;d} trực giao trên [-1, 1] với trọng (1 - t²)^{(d-2)/2}; d = 2 cho Legendre P_ℓ.
- Tích phân trên S^d của hàm theo ⟨x, y⟩ quy về μ_{d-1}·∫ f(t)(1 - t²)^{(d-2)/2} dt.

Mọi hàm ở đây là thuần (pure); quy tắc quadrature được cache bằng `lru_cache`
nên an toàn khi gọi song song từ nhiều thread.
"""

import csv
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.special as sps
from scipy import optimize

from config.config import Config
from numerics.errors import ConvergenceError, DomainError, QuadratureBudgetError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Sai số làm tròn cho phép khi |t| vượt 1 một chút (vd tích vô hướng của 2 điểm trên cầu)
_T_SLACK = 1e-12

# Số node Gauss–Legendre trên mỗi đoạn giữa hai không điểm Bessel
_SEGMENT_NODES = 32
_BESSEL_SEGMENTS = 400
_EULER_DEPTH = 24


# ==================== Hằng số ====================

def sphere_area(k: int) -> float:
    """Diện tích mặt cầu đơn vị S^k (μ_0 = 2, μ_1 = 2π, μ_2 = 4π)."""
    if k < 0:
        raise DomainError(f"Chiều mặt cầu phải ≥ 0, nhận được k={k}.")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class SphereDim:
    d: int
    mu_d: float
    mu_dm1: float

    def __post_init__(self):
        if self.d < 2:
            raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={self.d}.")


@functools.lru_cache(maxsize=None)
def sphere_dim(d: int) -> SphereDim:
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    return SphereDim(d=d, mu_d=sphere_area(d), mu_dm1=sphere_area(d - 1))


@dataclass(frozen=True)
class EigenIndex:
    """Chỉ số riêng ℓ trên S^d: số chiều không gian riêng và trị riêng ℓ(ℓ+d−1)."""

    ell: int
    d: int
    n_ell_d: int
    lam: int


def eigenspace_dim(d: int, ell: int) -> int:
    """Số chiều n_{ℓ;d} của không gian điều hoà bậc ℓ trên S^d.

    Tính bằng hiệu hai tổ hợp (số nguyên Python) nên không tràn số với ℓ, d lớn:
    n_{ℓ;d} = C(ℓ+d, d) − C(ℓ+d−2, d).
    """
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    return math.comb(ell + d, d) - math.comb(ell + d - 2, d)


def eigen_index(d: int, ell: int) -> EigenIndex:
    return EigenIndex(ell=ell, d=d, n_ell_d=eigenspace_dim(d, ell), lam=ell * (ell + d - 1))


# ==================== Gegenbauer ====================

def _check_t(t: ArrayLike) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("t phải hữu hạn.")
    if np.any(np.abs(arr) > 1.0 + _T_SLACK):
        raise DomainError(f"Cần |t| ≤ 1, nhận được max|t| = {np.max(np.abs(arr))!r}.")
    return np.clip(arr, -1.0, 1.0)


def gegenbauer_table(d: int, ell_max: int, t: ArrayLike) -> np.ndarray:
    """Trả về mảng shape (ell_max + 1, *t.shape) chứa G_{j;d}(t), j = 0..ell_max.

    Dùng hồi quy ba số hạng đã chuẩn hoá sẵn theo G(1) = 1:
        G_j = [(2j + d − 3)·t·G_{j−1} − (j − 1)·G_{j−2}] / (j + d − 2)
    nên giá trị luôn bị chặn bởi 1, không tràn số kể cả ℓ ~ 10^4.
    """
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    if ell_max < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell_max}.")
    x = _check_t(t)
    out = np.empty((ell_max + 1,) + x.shape)
    out[0] = 1.0
    if ell_max >= 1:
        out[1] = x
    for j in range(2, ell_max + 1):
        out[j] = ((2 * j + d - 3) * x * out[j - 1] - (j - 1) * out[j - 2]) / (j + d - 2)
    return out


def gegenbauer_eval(d: int, ell: int, t: ArrayLike) -> ArrayLike:
    """G_{ℓ;d}(t), chuẩn hoá G_{ℓ;d}(1) = 1. Nhận scalar hoặc ndarray."""
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    x = _check_t(t)
    prev = np.ones_like(x)
    if ell == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for j in range(2, ell + 1):
        prev, cur = cur, ((2 * j + d - 3) * x * cur - (j - 1) * prev) / (j + d - 2)
    return cur if cur.ndim else float(cur)


# ==================== Quadrature 1-D ====================

@dataclass(frozen=True, eq=False)
class QuadratureRule1D:
    """Quy tắc Gauss cho trọng (1 − t²)^{(d−2)/2} trên [−1, 1]."""

    d: int
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def size(self) -> int:
        return int(self.nodes.size)


def nodes_for_degree(degree: int) -> int:
    """Số node cho quy tắc chính xác tới bậc `degree`, cộng thêm 5 node dự phòng."""
    return math.ceil((max(degree, 0) + 2) / 2) + 5


@functools.lru_cache(maxsize=256)
def _gauss_rule(d: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    if d == 2:
        x, w = sps.roots_legendre(n)
    else:
        # C^{(α)} trực giao với trọng (1 − t²)^{α − 1/2}; α = (d − 1)/2
        x, w = sps.roots_gegenbauer(n, (d - 1) / 2.0)
    x.setflags(write=False)
    w.setflags(write=False)
    logger.debug("Đã dựng quy tắc Gauss d=%s với %s node.", d, n)
    return x, w


def quadrature_rule(d: int, degree: int) -> QuadratureRule1D:
    """Quy tắc Gauss chính xác cho đa thức bậc ≤ `degree` với trọng của S^d.

    Raise `QuadratureBudgetError` khi số node vượt `Config().MAX_QUADRATURE_NODES`.
    """
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    n = nodes_for_degree(degree)
    budget = Config().MAX_QUADRATURE_NODES
    if n > budget:
        raise QuadratureBudgetError(n, budget)
    x, w = _gauss_rule(d, n)
    return QuadratureRule1D(d=d, nodes=x, weights=w, exact_degree=2 * n - 1)


def gauss_rule(d: int, n: int) -> QuadratureRule1D:
    """Quy tắc Gauss đúng `n` node (không cộng node dự phòng), dùng cho lưới tích."""
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    if n < 1:
        raise DomainError(f"Cần ít nhất 1 node, nhận được n={n}.")
    x, w = _gauss_rule(d, n)
    return QuadratureRule1D(d=d, nodes=x, weights=w, exact_degree=2 * n - 1)


def line_measure(d: int) -> float:
    """∫_{−1}^{1} (1 − t²)^{(d−2)/2} dt = B(1/2, d/2)."""
    return float(sps.beta(0.5, d / 2.0))


def export_rule_csv(rule: QuadratureRule1D, path: Union[str, Path]) -> Path:
    """Ghi quy tắc ra CSV (cột node, weight) để debug."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "weight"])
        for x, w in zip(rule.nodes, rule.weights):
            writer.writerow([repr(float(x)), repr(float(w))])
    return path


# ==================== Moment ====================

@functools.lru_cache(maxsize=4096)
def sphere_moment(d: int, ell: int, q: int) -> float:
    """∫_{S^d} G_{ℓ;d}(⟨x, y⟩)^q dx (không phụ thuộc y), tính đúng bằng Gauss."""
    if q < 0:
        raise DomainError(f"q phải ≥ 0, nhận được q={q}.")
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    dim = sphere_dim(d)
    rule = quadrature_rule(d, q * ell)
    g = gegenbauer_eval(d, ell, rule.nodes)
    return float(dim.mu_dm1 * np.dot(rule.weights, g ** q))


def gegenbauer_project(
    d: int,
    values_fn: Callable[[np.ndarray], np.ndarray],
    j_max: int,
    degree: int,
) -> np.ndarray:
    """Hệ số c_j của f(t) = Σ_j c_j·G_{j;d}(t), j = 0..j_max.

    c_j = n_{j;d}·(μ_{d−1}/μ_d)·∫ f·G_j·w dt; `degree` là bậc đa thức của f
    (tích f·G_j được tích phân đúng khi degree + j_max ≤ exact_degree).
    """
    dim = sphere_dim(d)
    rule = quadrature_rule(d, degree + j_max)
    table = gegenbauer_table(d, j_max, rule.nodes)
    f = np.asarray(values_fn(rule.nodes), dtype=float)
    n_j = np.array([eigenspace_dim(d, j) for j in range(j_max + 1)], dtype=float)
    return n_j * (dim.mu_dm1 / dim.mu_d) * (table @ (rule.weights * f))


def gegenbauer_coefficients(
    d: int,
    values_fn: Callable[[np.ndarray], np.ndarray],
    j_max: int,
    degree: Optional[int] = None,
) -> np.ndarray:
    """Chiếu f lên G_0..G_{j_max}; mặc định coi f là đa thức bậc ≤ j_max."""
    if j_max < 0:
        raise DomainError(f"j_max phải ≥ 0, nhận được {j_max}.")
    return gegenbauer_project(d, values_fn, j_max, j_max if degree is None else degree)


def orthogonality_defect(d: int, ell_max: int) -> float:
    """max |μ_{d−1}∫G_j G_k w − δ_{jk}·μ_d/n_j| với j, k ≤ ell_max."""
    dim = sphere_dim(d)
    rule = quadrature_rule(d, 2 * ell_max)
    table = gegenbauer_table(d, ell_max, rule.nodes)
    gram = dim.mu_dm1 * (table * rule.weights) @ table.T
    target = np.diag([dim.mu_d / eigenspace_dim(d, j) for j in range(ell_max + 1)])
    return float(np.max(np.abs(gram - target)))


@functools.lru_cache(maxsize=256)
def _jacobi_rule(n: int, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss–Jacobi n node cho trọng (1 − r²)^a trên [−1, 1]."""
    x, w = sps.roots_jacobi(n, a, a)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def reproducing_check(d: int, ell: int, n_points: int = 21) -> float:
    """Sai số lớn nhất của ∫G(⟨x,z⟩)G(⟨z,y⟩)dz = (μ_d/n_ℓ)·G(⟨x,y⟩) trên lưới ⟨x,y⟩ = t.

    Vế trái là tích phân thật theo z trên S^d: đặt z = s·x + √(1−s²)·u với u ⟂ x,
    r = ⟨u, e⟩ (e là hướng của y trong x^⟂), khi đó ⟨z,y⟩ = st + √(1−s²)√(1−t²)·r và
    dz = μ_{d−2}(1−s²)^{(d−2)/2}(1−r²)^{(d−3)/2} ds dr. Tích Gauss–Jacobi ℓ+2 node
    mỗi chiều tích phân đúng đa thức bậc 2ℓ này.
    """
    if d < 2:
        raise DomainError(f"Chỉ hỗ trợ d ≥ 2, nhận được d={d}.")
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    n = ell + 2
    budget = Config().MAX_QUADRATURE_NODES
    if n > budget:
        raise QuadratureBudgetError(n, budget)

    s, ws = _jacobi_rule(n, (d - 2) / 2.0)
    r, wr = _jacobi_rule(n, (d - 3) / 2.0)
    g_s = gegenbauer_eval(d, ell, s)
    radial = np.sqrt(1.0 - s * s)[:, None] * r[None, :]
    weights = sphere_area(d - 2) * (ws * g_s)[:, None] * wr[None, :]

    worst = 0.0
    target = sphere_area(d) / eigenspace_dim(d, ell)
    for t in np.linspace(-1.0, 1.0, n_points):
        arg = np.clip(s[:, None] * t + math.sqrt(max(0.0, 1.0 - t * t)) * radial, -1.0, 1.0)
        lhs = float(np.sum(weights * gegenbauer_eval(d, ell, arg)))
        worst = max(worst, abs(lhs - target * gegenbauer_eval(d, ell, t)))
    return worst


# ==================== Hằng số tiệm cận c_{q;d} ====================

@functools.lru_cache(maxsize=64)
def _bessel_zeros(nu: float, count: int) -> np.ndarray:
    """`count` không điểm dương đầu tiên của J_ν."""
    if float(nu).is_integer():
        return sps.jn_zeros(int(nu), count)
    # Bậc bán nguyên: quét lưới bước 0.05 rồi brentq trên mỗi đoạn đổi dấu
    upper = (count + nu / 2.0 + 2.0) * math.pi
    grid = np.arange(0.05, upper, 0.05)
    vals = sps.jv(nu, grid)
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    zeros = [
        optimize.brentq(lambda u: sps.jv(nu, u), grid[i], grid[i + 1], xtol=1e-14)
        for i in idx[:count]
    ]
    if len(zeros) < count:
        raise ConvergenceError(f"Chỉ tìm được {len(zeros)}/{count} không điểm của J_{nu}.")
    return np.asarray(zeros)


def _segment_integrals(nu: float, q: int, power: float, zeros: np.ndarray) -> np.ndarray:
    """∫ trên từng đoạn [z_{k−1}, z_k] của (2^ν Γ(ν+1))^q·J_ν(u)^q·u^power."""
    gx, gw = sps.roots_legendre(_SEGMENT_NODES)
    edges = np.concatenate(([0.0], zeros))
    a, b = edges[:-1, None], edges[1:, None]
    u = 0.5 * (b - a) * gx[None, :] + 0.5 * (a + b)
    scale = 2.0 ** nu * math.gamma(nu + 1.0)
    f = (scale * sps.jv(nu, u)) ** q * u ** power
    return 0.5 * (b[:, 0] - a[:, 0]) * (f @ gw)


def _euler_limit(partial_sums: np.ndarray) -> float:
    """Trung bình lặp các tổng riêng của chuỗi đan dấu (biến đổi Euler)."""
    s = np.array(partial_sums[-_EULER_DEPTH:], dtype=float)
    while s.size > 1:
        s = 0.5 * (s[:-1] + s[1:])
    return float(s[0])


def _bessel_constant(d: int, q: int, segments: int) -> float:
    nu = d / 2.0 - 1.0
    power = -q * nu + d - 1
    zeros = _bessel_zeros(nu, segments)
    parts = _segment_integrals(nu, q, power, zeros)
    partial = np.cumsum(parts)
    if q % 2 == 1:
        return _euler_limit(partial)
    # q chẵn: J^q ≥ 0, phần đuôi xấp xỉ bằng dạng tiệm cận của J_ν
    p = (d - 1) * (q - 2) / 2.0
    upper = zeros[-1]
    scale = 2.0 ** nu * math.gamma(nu + 1.0)
    mean_cos = math.comb(q, q // 2) / 2.0 ** q
    tail = scale ** q * (2.0 / math.pi) ** (q / 2.0) * mean_cos * upper ** (1.0 - p) / (p - 1.0)
    return float(partial[-1] + tail)


@functools.lru_cache(maxsize=128)
def asymptotic_constant(d: int, q: int) -> float:
    """Hằng số c_{q;d} trong tiệm cận moment của Gegenbauer.

    q = 2 dùng công thức đóng (d−1)!·μ_d / (4μ_{d−1}); q ≥ 3 tính tích phân
    Bessel dao động theo từng đoạn giữa các không điểm, tăng tốc bằng Euler
    (q lẻ) hoặc cộng phần đuôi tiệm cận (q chẵn). Cặp (d=2, q=4) phân kỳ loga.
    """
    if q < 2:
        raise DomainError(f"c_{{q;d}} chỉ định nghĩa cho q ≥ 2, nhận được q={q}.")
    dim = sphere_dim(d)
    if q == 2:
        return math.factorial(d - 1) * dim.mu_d / (4.0 * dim.mu_dm1)
    if d == 2 and q == 4:
        raise DomainError("Tích phân Bessel phân kỳ với (d=2, q=4); dùng dạng 12·log ℓ/(πℓ²).")

    value = _bessel_constant(d, q, _BESSEL_SEGMENTS)
    check = _bessel_constant(d, q, _BESSEL_SEGMENTS - 40)
    if abs(value - check) > 1e-6 * max(1.0, abs(value)):
        raise ConvergenceError(
            f"c_{{{q};{d}}} chưa hội tụ: {value!r} so với {check!r} (bớt 40 đoạn)."
        )
    logger.debug("c_{%s;%s} = %.12g", q, d, value)
    return value


def limit_estimate(d: int, q: int, ell: int) -> float:
    """Ước lượng c_{q;d} từ giới hạn ℓ^d·∫G^q / (2μ_{d−1}) (ℓ^{d−1} khi q = 2)."""
    dim = sphere_dim(d)
    exponent = d - 1 if q == 2 else d
    return ell ** exponent * sphere_moment(d, ell, q) / (2.0 * dim.mu_dm1)


# Hệ số của log ℓ trong ℓ²·∫_{S²}P_ℓ⁴ đo từ moment chính xác (ℓ ≤ 800);
# dạng 12·log ℓ/(πℓ²) của `moment_asymptote` lớn gấp 2 hệ số này.
LOG_BRANCH_COEFF = 6.0 / math.pi


def log_branch_coefficient(ell: int) -> float:
    """Ước lượng hệ số A trong ℓ²∫P_ℓ⁴ ≈ A·log ℓ + K bằng hiệu giữa ℓ/2 và ℓ."""
    if ell < 4 or ell % 2:
        raise DomainError(f"Cần ℓ chẵn ≥ 4, nhận được ell={ell}.")
    half = ell // 2
    growth = ell ** 2 * sphere_moment(2, ell, 4) - half ** 2 * sphere_moment(2, half, 4)
    return growth / math.log(ell / half)


def moment_asymptote(d: int, q: int, ell: int) -> float:
    """Dạng tiệm cận bậc nhất của ∫_{S^d} G_{ℓ;d}^q khi ℓ → ∞ (ℓ chẵn)."""
    if q < 2:
        raise DomainError(f"Chỉ có tiệm cận cho q ≥ 2, nhận được q={q}.")
    if ell < 1:
        raise DomainError(f"Tiệm cận cần ℓ ≥ 1, nhận được ell={ell}.")
    dim = sphere_dim(d)
    if q == 2:
        return 2.0 * dim.mu_dm1 * asymptotic_constant(d, 2) / ell ** (d - 1)
    if d == 2 and q == 4:
        return 12.0 * math.log(ell) / (math.pi * ell ** 2)
    return 2.0 * dim.mu_dm1 * asymptotic_constant(d, q) / ell ** d
