#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Đa thức Hermite (xác suất) và khai triển chaos của hàm thử φ.

φ(Z) = Σ_q (b_q / q!)·H_q(Z) với b_q = E[φ(Z)·H_q(Z)], Z ~ N(0, 1).

Các loại φ được hỗ trợ (`kind`):
- `exponential` (tham số t): b_q = e^{t²/2}·t^q, dạng đóng.
- `hermite` (tham số p): φ = H_p, b_q = p!·δ_{pq}.
- `polynomial` (tham số coeffs = a_0..a_m theo đơn thức): đổi cơ sở sang Hermite.
- `indicator` (tham số u): φ = 1{z > u}; luôn bị đánh dấu không được hỗ trợ.
- `tabulated`: hệ số b_q cho sẵn.
- `callable`: hàm Python bất kỳ, hệ số tính bằng Gauss–Hermite có kiểm tra nhân đôi node.

Đuôi chuỗi Σ_{q>Q} b_q²/q! được chặn qua bao hình học |b_q| ≤ C·R^q:
Σ_{q>Q} C²R^{2q}/q! = C²·e^{R²}·P(Q+1, R²) với P là hàm gamma không đầy đủ chuẩn hoá.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.special as sps
from numpy.polynomial import hermite_e

from numerics.errors import ChaosQuadratureError, DomainError, TruncationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DEFAULT_EPSILON_TAIL = 1e-12
SCAN_Q = 40
CRAMER_CONSTANT = 1.086435
_MAX_DEFAULT_Q = 120
_KINDS = ("exponential", "hermite", "polynomial", "indicator", "tabulated", "callable")


# ==================== Hermite ====================

def hermite_eval(q: int, x: ArrayLike) -> ArrayLike:
    """H_q(x) xác suất qua hồi quy H_{q+1} = x·H_q − q·H_{q−1}."""
    if q < 0:
        raise DomainError(f"Bậc Hermite phải ≥ 0, nhận được q={q}.")
    arr = np.asarray(x, dtype=float)
    prev = np.ones_like(arr)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = arr.copy()
    for n in range(1, q):
        prev, cur = cur, arr * cur - n * prev
    return cur if cur.ndim else float(cur)


def normalized_hermite_table(q_max: int, x: ArrayLike) -> np.ndarray:
    """h_q(x) = H_q(x)/√(q!) cho q = 0..q_max; shape (q_max + 1, *x.shape).

    Hồi quy h_{q+1} = (x·h_q − √q·h_{q−1}) / √(q+1) không tràn số khi q lớn.
    """
    arr = np.asarray(x, dtype=float)
    out = np.empty((q_max + 1,) + arr.shape)
    out[0] = 1.0
    if q_max >= 1:
        out[1] = arr
    for q in range(1, q_max):
        out[q + 1] = (arr * out[q] - math.sqrt(q) * out[q - 1]) / math.sqrt(q + 1)
    return out


def _sqrt_factorials(n: int) -> np.ndarray:
    return np.exp(0.5 * sps.gammaln(np.arange(n) + 1.0))


# ==================== ChaosSpec ====================

@dataclass(frozen=True)
class ChaosSpec:
    """Hàm thử φ biểu diễn qua hệ số Hermite b_0..b_Q kèm metadata chặn đuôi."""

    kind: str
    params: Dict[str, Any]
    coeffs: Tuple[float, ...]
    growth: Optional[Tuple[float, float]] = None
    tail_bound: Optional[float] = None
    epsilon_tail: float = DEFAULT_EPSILON_TAIL
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False, repr=False)

    @property
    def Q(self) -> int:
        return len(self.coeffs) - 1

    def b(self, q: int) -> float:
        return self.coeffs[q] if 0 <= q <= self.Q else 0.0

    @property
    def norm_sq(self) -> float:
        """Σ_{q≤Q} b_q²/q! (= E[φ(Z)²] khi đuôi bằng 0)."""
        return float(sum(b * b / math.factorial(q) for q, b in enumerate(self.coeffs)))

    @property
    def finite_expansion(self) -> bool:
        return self.kind in ("hermite", "polynomial") or (
            self.kind in ("tabulated", "callable") and self.tail_bound == 0.0
        )

    @property
    def certified(self) -> bool:
        if self.kind == "indicator" or self.tail_bound is None:
            return False
        return self.tail_bound <= self.epsilon_tail * max(self.norm_sq, 1e-300)

    def series(self, x: ArrayLike) -> ArrayLike:
        """Σ_{q≤Q} (b_q/q!)·H_q(x), tổng cắt cụt."""
        return derivative_series(self, 0, x)

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        """φ(x): dùng dạng đóng khi có, ngược lại dùng tổng cắt cụt."""
        arr = np.asarray(x, dtype=float)
        if self.kind == "exponential":
            out = np.exp(self.params["t"] * arr)
        elif self.kind == "hermite":
            out = np.asarray(hermite_eval(int(self.params["p"]), arr))
        elif self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(arr, self.params["coeffs"])
        elif self.kind == "indicator":
            out = (arr > self.params["u"]).astype(float)
        elif self.kind == "callable" and self.func is not None:
            out = np.asarray(self.func(arr), dtype=float)
        else:
            return self.series(x)
        return out if np.ndim(out) else float(out)

    def abs_spec(self) -> "AbsChaosSpec":
        return AbsChaosSpec(coeffs=tuple(abs(b) for b in self.coeffs[2:]))

    def truncated(self, Q: int) -> "ChaosSpec":
        """Bản sao cắt tại Q (tính lại chặn đuôi nếu có bao hình học)."""
        coeffs = tuple(self.coeffs[: Q + 1]) + (0.0,) * max(0, Q - self.Q)
        tail = self.tail_bound
        if self.growth is not None:
            tail = envelope_tail_bound(*self.growth, Q)
        elif self.finite_expansion:
            tail = 0.0 if all(b == 0.0 for b in self.coeffs[Q + 1:]) else None
        return ChaosSpec(self.kind, dict(self.params), coeffs, self.growth, tail, self.epsilon_tail, self.func)

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "coeffs": list(self.coeffs),
            "Q": self.Q,
            "growth": list(self.growth) if self.growth else None,
            "tail_bound": self.tail_bound,
            "epsilon_tail": self.epsilon_tail,
        }

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "ChaosSpec":
        growth = payload.get("growth")
        return cls(
            kind=payload["kind"],
            params=dict(payload.get("params") or {}),
            coeffs=tuple(float(b) for b in payload["coeffs"]),
            growth=tuple(growth) if growth else None,
            tail_bound=payload.get("tail_bound"),
            epsilon_tail=payload.get("epsilon_tail", DEFAULT_EPSILON_TAIL),
        )


@dataclass(frozen=True)
class AbsChaosSpec:
    """φ̂(z) = Σ_{q≥2} |b_q|/q!·H_q(z); coeffs[0] ứng với q = 2."""

    coeffs: Tuple[float, ...]

    def b(self, q: int) -> float:
        i = q - 2
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else 0.0

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        full = ChaosSpec("tabulated", {}, (0.0, 0.0) + tuple(self.coeffs), tail_bound=0.0)
        return derivative_series(full, 0, x)


# ==================== Bao hình học ====================

def envelope_tail_bound(C: float, R: float, Q: int) -> float:
    """Chặn trên của Σ_{q>Q} b_q²/q! khi |b_q| ≤ C·R^q."""
    if R == 0.0:
        return 0.0
    return float(C * C * math.exp(R * R) * sps.gammainc(Q + 1, R * R))


def fit_envelope(coeffs: Sequence[float], start: int = 2) -> Optional[Tuple[float, float]]:
    """Khớp |b_q| ≤ C·R^q bằng bình phương tối thiểu trên log|b_q| (q ≥ start).

    Hệ số chặn được nâng lên bằng phần dư lớn nhất nên bao luôn nằm trên mọi
    điểm đã khớp. Trả về None nếu có ít hơn 2 hệ số khác 0.
    """
    b = np.abs(np.asarray(coeffs, dtype=float))
    q = np.arange(b.size)
    scale = b[start:].max() if b.size > start else 0.0
    mask = (q >= start) & (b > max(1e-300, 1e-15 * scale))
    if np.count_nonzero(mask) < 2:
        return None
    qs, logs = q[mask].astype(float), np.log(b[mask])
    slope, intercept = np.polyfit(qs, logs, 1)
    resid = logs - (intercept + slope * qs)
    return float(math.exp(intercept + resid.max())), float(math.exp(slope))


def dominating_moment_bound(C: float, R: float, p: float) -> float:
    """E[(C·e^{R² + R|Z|})^p] = C^p·e^{pR²}·2·e^{(pR)²/2}·Φ(pR).

    C·e^{R²+R|z|} chặn trên Σ_q |b_q|/q!·|H_q(z)| khi |b_q| ≤ C·R^q.
    """
    pr = p * R
    return float(C ** p * math.exp(p * R * R + 0.5 * pr * pr) * 2.0 * sps.ndtr(pr))


def _default_Q(norm_fn: Callable[[int], float], tail_fn: Callable[[int], float], eps: float) -> Optional[int]:
    for Q in range(2, _MAX_DEFAULT_Q + 1):
        if tail_fn(Q) <= eps * max(norm_fn(Q), 1e-300):
            return Q
    return None


# ==================== chaos_coeffs ====================

def _exponential_spec(t: float, Q: Optional[int], eps: float) -> ChaosSpec:
    C, R = math.exp(0.5 * t * t), abs(t)
    if Q is None:
        Q = _default_Q(lambda _: math.exp(2.0 * t * t), lambda n: envelope_tail_bound(C, R, n), eps) or _MAX_DEFAULT_Q
    coeffs = tuple(C * t ** q for q in range(Q + 1))
    return ChaosSpec("exponential", {"t": t}, coeffs, (C, R), envelope_tail_bound(C, R, Q), eps)


def _polynomial_spec(kind: str, params: Dict[str, Any], mono: Sequence[float], Q: Optional[int], eps: float) -> ChaosSpec:
    e = hermite_e.poly2herme(np.asarray(mono, dtype=float))
    degree = max(len(e) - 1, 2)
    Q = degree if Q is None else Q
    coeffs = [0.0] * (Q + 1)
    for k, ek in enumerate(e[: Q + 1]):
        coeffs[k] = float(math.factorial(k) * ek)
    tail = 0.0 if Q >= len(e) - 1 else None
    return ChaosSpec(kind, params, tuple(coeffs), None, tail, eps)


def _indicator_spec(u: float, Q: Optional[int], eps: float) -> ChaosSpec:
    Q = SCAN_Q if Q is None else Q
    coeffs = [float(sps.ndtr(-u))]
    dens = math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    coeffs += [float(hermite_eval(q - 1, u) * dens) for q in range(1, Q + 1)]
    return ChaosSpec("indicator", {"u": u}, tuple(coeffs), None, None, eps)


def _gauss_hermite_normalized(func: Callable, Q: int, n: int) -> np.ndarray:
    """b_q/√(q!) tính bằng Gauss–Hermite n node (trọng e^{−x²/2})."""
    x, w = hermite_e.hermegauss(n)
    fx = np.asarray(func(x), dtype=float)
    table = normalized_hermite_table(Q, x)
    return table @ (w * fx) / math.sqrt(2.0 * math.pi)


def _callable_spec(func: Callable, Q: Optional[int], eps: float) -> ChaosSpec:
    q_scan = SCAN_Q if Q is None else Q
    n = q_scan + 16
    coarse = _gauss_hermite_normalized(func, q_scan, n)
    fine = _gauss_hermite_normalized(func, q_scan, 2 * n)
    diff = float(np.max(np.abs(coarse - fine)))
    if diff > 1e-9 * max(1.0, float(np.max(np.abs(fine)))):
        raise ChaosQuadratureError(
            f"Gauss–Hermite {n} và {2 * n} node lệch {diff:.3e} trên hệ số chuẩn hoá."
        )
    coeffs = fine * _sqrt_factorials(q_scan + 1)
    growth = fit_envelope(coeffs)
    tail = None
    if growth is not None:
        if Q is None:
            chosen = _default_Q(
                lambda m: float(np.sum(fine[: m + 1] ** 2)),
                lambda m: envelope_tail_bound(*growth, m),
                eps,
            )
            q_scan = min(chosen, q_scan) if chosen is not None else q_scan
        tail = envelope_tail_bound(*growth, q_scan)
    elif np.all(np.abs(coeffs[3:]) < 1e-12 * max(1.0, float(np.max(np.abs(coeffs))))):
        tail = 0.0
    return ChaosSpec("callable", {}, tuple(float(b) for b in coeffs[: q_scan + 1]), growth, tail, eps, func)


def chaos_coeffs(
    phi: Union[str, Dict[str, Any], Callable[[np.ndarray], np.ndarray]],
    Q: Optional[int] = None,
    params: Optional[Dict[str, Any]] = None,
    epsilon_tail: float = DEFAULT_EPSILON_TAIL,
) -> ChaosSpec:
    """Dựng `ChaosSpec` từ tag (`"exponential"`, ...), dict JSON hoặc callable.

    Q = None chọn Q nhỏ nhất (≥ 2) có chặn đuôi ≤ epsilon_tail·Σ b_q²/q!.
    """
    if Q is not None and Q < 2:
        raise DomainError(f"Q phải ≥ 2, nhận được Q={Q}.")
    if callable(phi):
        return _callable_spec(phi, Q, epsilon_tail)

    if isinstance(phi, dict):
        kind = phi.get("kind")
        params = dict(phi.get("params") or {}, **(params or {}))
        Q = phi.get("Q", Q) if Q is None else Q
        if kind == "tabulated" and "coeffs" in phi:
            params.setdefault("coeffs", phi["coeffs"])
    else:
        kind, params = phi, dict(params or {})

    if kind not in _KINDS:
        raise DomainError(f"Loại φ không hợp lệ: {kind!r}. Chấp nhận: {', '.join(_KINDS)}.")
    try:
        if kind == "exponential":
            return _exponential_spec(float(params["t"]), Q, epsilon_tail)
        if kind == "hermite":
            p = int(params["p"])
            size = max(p, 2) + 1 if Q is None else Q + 1
            coeffs = [0.0] * size
            if p < size:
                coeffs[p] = float(math.factorial(p))
            tail = 0.0 if p < size else None
            return ChaosSpec("hermite", {"p": p}, tuple(coeffs), None, tail, epsilon_tail)
        if kind == "polynomial":
            mono = [float(a) for a in params["coeffs"]]
            return _polynomial_spec("polynomial", {"coeffs": mono}, mono, Q, epsilon_tail)
        if kind == "indicator":
            return _indicator_spec(float(params["u"]), Q, epsilon_tail)
        if kind == "tabulated":
            coeffs = tuple(float(b) for b in params["coeffs"])
            if len(coeffs) < 3:
                coeffs = coeffs + (0.0,) * (3 - len(coeffs))
            tail = params.get("tail_bound", 0.0)
            return ChaosSpec("tabulated", {"coeffs": list(coeffs), "tail_bound": tail}, coeffs, None, tail, epsilon_tail)
    except KeyError as e:
        raise DomainError(f"φ loại {kind!r} thiếu tham số {e.args[0]!r}.")
    raise DomainError(f"φ loại {kind!r} cần truyền callable.")


# ==================== Chuỗi đạo hàm ====================

def derivative_series(
    spec: Union[ChaosSpec, AbsChaosSpec],
    k: int,
    x: ArrayLike,
    variant: str = "plain",
    min_order: int = 0,
) -> ArrayLike:
    """Σ_{q≥k} c_q·b_q·H_{q−k}(x)/(q−k)! theo biến thể:

    - `plain`: c_q = 1 (D^k φ)
    - `L`:     c_q = −q (D^k Lφ)
    - `abs`:   dùng |b_q|, q ≥ 2 ∨ k (D^k φ̂)
    - `abs_L`: dùng −q·|b_q|, q ≥ 2 ∨ k (D^k Lφ̂)

    `min_order` bỏ các q nhỏ hơn (vd σ_ℓ dùng min_order=2 với k=1).
    """
    if k < 0:
        raise DomainError(f"k phải ≥ 0, nhận được k={k}.")
    if variant not in ("plain", "L", "abs", "abs_L"):
        raise DomainError(f"Biến thể không hợp lệ: {variant!r}.")
    if isinstance(spec, AbsChaosSpec):
        coeffs = np.array([0.0, 0.0] + list(spec.coeffs))
    else:
        if not spec.certified and spec.kind != "indicator":
            logger.warning("Chuỗi chaos loại %s chưa được chứng nhận phần đuôi (Q=%s).", spec.kind, spec.Q)
        coeffs = np.array(spec.coeffs, dtype=float)

    lo = max(k, min_order)
    if variant in ("abs", "abs_L"):
        coeffs = np.abs(coeffs)
        lo = max(lo, 2)
    if variant in ("L", "abs_L"):
        coeffs = -np.arange(coeffs.size) * coeffs

    arr = np.asarray(x, dtype=float)
    Q = coeffs.size - 1
    if lo > Q:
        out = np.zeros_like(arr)
        return out if out.ndim else float(out)
    m_max = Q - k
    table = normalized_hermite_table(m_max, arr)
    # H_m/m! = h_m/√(m!)
    scaled = coeffs[k:] / _sqrt_factorials(m_max + 1)
    scaled[: lo - k] = 0.0
    out = np.tensordot(scaled, table, axes=(0, 0))
    return out if np.ndim(out) else float(out)


def pointwise_tail_bound(
    spec: ChaosSpec, k: int, x: ArrayLike, variant: str = "plain", n_terms: int = 400
) -> Optional[ArrayLike]:
    """Chặn trên |D^k φ(x) − derivative_series(spec, k, x, variant)| tại từng điểm.

    `tail_bound` là chặn L²; ở đây dùng bất đẳng thức Cramér
    |H_m(x)| ≤ K·√(m!)·e^{x²/4} với bao |b_q| ≤ C·R^q:
    Σ_{q>Q} C·R^q·|c_q|/√((q−k)!)·K·e^{x²/4}, c_q = 1 hoặc q (biến thể L).
    Khai triển hữu hạn đã đủ bậc cho 0; không có bao hình học thì None.
    """
    if k < 0:
        raise DomainError(f"k phải ≥ 0, nhận được k={k}.")
    arr = np.asarray(x, dtype=float)
    if spec.growth is None:
        if spec.tail_bound == 0.0:
            out = np.zeros_like(arr)
            return out if out.ndim else float(out)
        return None
    C, R = spec.growth
    if R == 0.0:
        out = np.zeros_like(arr)
        return out if out.ndim else float(out)
    q = np.arange(max(spec.Q + 1, k), spec.Q + 1 + n_terms, dtype=float)
    log_terms = q * math.log(R) - 0.5 * sps.gammaln(q - k + 1.0)
    if variant in ("L", "abs_L"):
        log_terms = log_terms + np.log(q)
    tail = C * float(np.sum(np.exp(log_terms)))
    out = CRAMER_CONSTANT * tail * np.exp(0.25 * arr * arr)
    return out if np.ndim(out) else float(out)


# ==================== Kiểm tra giả thiết ====================

@dataclass
class AssumptionReport:
    passed: bool
    b2_nonzero: bool
    finite_expansion: bool
    envelope: Optional[Tuple[float, float]]
    envelope_holds: bool
    tail_bound: Optional[float]
    certified: bool
    dominating_moment: Optional[float] = None
    unsupported: Optional[str] = None
    messages: List[str] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "b2_nonzero": self.b2_nonzero,
            "finite_expansion": self.finite_expansion,
            "envelope": list(self.envelope) if self.envelope else None,
            "envelope_holds": self.envelope_holds,
            "tail_bound": self.tail_bound,
            "certified": self.certified,
            "dominating_moment": self.dominating_moment,
            "unsupported": self.unsupported,
            "messages": list(self.messages),
        }


def check_assumption(spec: ChaosSpec, moment_order: float = 4.0) -> AssumptionReport:
    """Kiểm tra b_2 ≠ 0 và bao hình học |b_q| ≤ C·R^q cho φ.

    Bao được khớp trên 2/3 đầu các hệ số (q ≥ 2) rồi kiểm tra trên phần còn lại.
    Hàm chỉ thị luôn bị từ chối: φ(Z) không khả vi Malliavin.
    """
    b2_nonzero = abs(spec.b(2)) > 1e-14 * max(1.0, max(abs(b) for b in spec.coeffs))
    messages: List[str] = []
    if spec.kind == "indicator":
        messages.append("Hàm chỉ thị (excursion area) không thoả giả thiết chính quy.")
        return AssumptionReport(
            passed=False, b2_nonzero=b2_nonzero, finite_expansion=False, envelope=None,
            envelope_holds=False, tail_bound=None, certified=False,
            unsupported="indicator", messages=messages,
        )
    if not b2_nonzero:
        messages.append("b_2 = 0: hạng Hermite khác 2.")

    if spec.finite_expansion:
        return AssumptionReport(
            passed=b2_nonzero, b2_nonzero=b2_nonzero, finite_expansion=True, envelope=None,
            envelope_holds=True, tail_bound=0.0, certified=True, messages=messages,
        )

    coeffs = list(spec.coeffs)
    cut = 2 + max(2, (2 * (len(coeffs) - 2)) // 3)
    envelope = spec.growth or fit_envelope(coeffs[:cut])
    holds = False
    moment = None
    if envelope is not None:
        C, R = envelope
        held_out = [(q, abs(b)) for q, b in enumerate(coeffs) if q >= 2]
        holds = all(b <= C * R ** q * (1.0 + 1e-9) for q, b in held_out)
        moment = dominating_moment_bound(C, R, moment_order)
        if not holds:
            messages.append("Hệ số ngoài vùng khớp vượt bao hình học C·R^q.")
    else:
        messages.append("Không đủ hệ số khác 0 để khớp bao hình học.")

    return AssumptionReport(
        passed=b2_nonzero and holds,
        b2_nonzero=b2_nonzero,
        finite_expansion=False,
        envelope=envelope,
        envelope_holds=holds,
        tail_bound=spec.tail_bound,
        certified=spec.certified,
        dominating_moment=moment,
        messages=messages,
    )


def require_certified(spec: ChaosSpec) -> None:
    """Raise `TruncationError` nếu đuôi chuỗi chưa được chứng nhận."""
    if not spec.certified:
        raise TruncationError(
            f"Đuôi chuỗi chaos ({spec.kind}, Q={spec.Q}) chưa được chứng nhận ≤ "
            f"{spec.epsilon_tail:g}·Σb_q²/q! (tail_bound={spec.tail_bound!r})."
        )
