#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Sinh trường Gauss T_ℓ trên lưới cầu và phân tích điều hoà ngược lại.

Hai backend:
- `harmonic` (chỉ d = 2): rút 2ℓ+1 hệ số chuẩn, tổng hợp theo từng vòng vĩ độ
  bằng đa thức Legendre liên kết chuẩn hoá + FFT theo kinh độ.
- `cholesky` (mọi d): vector Gauss với hiệp phương sai [G_{ℓ;d}(⟨x_i, x_j⟩)],
  phân tích Cholesky có thêm jitter đường chéo tăng dần tới 1e−10.

Quy ước điều hoà thực trên S²: Y_0 = P̄_ℓ^0/√(2π), Y_{m,c} = P̄_ℓ^m cos(mφ)/√π,
Y_{m,s} = P̄_ℓ^m sin(mφ)/√π, với ∫_{−1}^{1} (P̄_ℓ^m)² dt = 1. Khi đó
Σ_m Y_m(x)Y_m(y) = (n_ℓ/μ_2)·P_ℓ(⟨x, y⟩) và Var T_ℓ(x) = 1.
"""

import json
import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.special as sps

from config.config import Config
from numerics.errors import BudgetError, DomainError, FactorizationError, GridDegreeError
from numerics.sphere_basis import eigenspace_dim, gauss_rule, gegenbauer_eval, sphere_dim
from utils.rng import stream

logger = logging.getLogger(__name__)

_JITTERS = (0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10)
_BACKENDS = ("auto", "harmonic", "cholesky")


# ==================== Lưới ====================

@dataclass(eq=False)
class SphereGrid:
    """Node x_i ∈ S^d (mảng (N, d+1)) cùng trọng w_i > 0, Σ w_i = μ_d."""

    d: int
    points: np.ndarray
    weights: np.ndarray
    kind: str
    spec: Dict[str, Any]
    exact_degree: int
    # Chỉ có với lưới vòng (d = 2): cosθ của từng vòng, số kinh độ, trọng mỗi node của vòng
    cos_theta: Optional[np.ndarray] = None
    n_az: int = 0
    ring_weights: Optional[np.ndarray] = None
    _cache: Dict[Tuple, Any] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def is_rings(self) -> bool:
        return self.kind == "gl-rings"

    @property
    def n_rings(self) -> int:
        return 0 if self.cos_theta is None else int(self.cos_theta.size)

    def cached(self, key: Tuple, build: Callable[[], Any]) -> Any:
        """Tính `build()` một lần cho mỗi khoá, an toàn khi nhiều thread dùng chung lưới."""
        with self._lock:
            if key not in self._cache:
                self._cache[key] = build()
            return self._cache[key]


def _ring_grid(ell: int, oversample: int) -> SphereGrid:
    n_rings = oversample * (ell + 1)
    n_az = oversample * (2 * ell + 2)
    t, w = sps.roots_legendre(n_rings)
    phi = 2.0 * np.pi * np.arange(n_az) / n_az
    sin_t = np.sqrt(1.0 - t * t)
    points = np.empty((n_rings * n_az, 3))
    points[:, 0] = np.repeat(sin_t, n_az) * np.tile(np.cos(phi), n_rings)
    points[:, 1] = np.repeat(sin_t, n_az) * np.tile(np.sin(phi), n_rings)
    points[:, 2] = np.repeat(t, n_az)
    ring_w = w * 2.0 * np.pi / n_az
    return SphereGrid(
        d=2,
        points=points,
        weights=np.repeat(ring_w, n_az),
        kind="gl-rings",
        spec={"kind": "gl-rings", "d": 2, "ell": ell, "oversample": oversample},
        exact_degree=min(2 * n_rings - 1, n_az - 1),
        cos_theta=t,
        n_az=n_az,
        ring_weights=ring_w,
    )


def _product_nodes(d: int, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Quy tắc tích đệ quy: x = (√(1 − t²)·y, t) với y ∈ S^{d−1}."""
    if d == 1:
        n_az = degree + 1
        phi = 2.0 * np.pi * np.arange(n_az) / n_az
        pts = np.column_stack([np.cos(phi), np.sin(phi)])
        return pts, np.full(n_az, 2.0 * np.pi / n_az)
    sub_pts, sub_w = _product_nodes(d - 1, degree)
    rule = gauss_rule(d, math.ceil((degree + 1) / 2))
    radius = np.sqrt(1.0 - rule.nodes ** 2)
    pts = np.concatenate(
        [np.column_stack([r * sub_pts, np.full(len(sub_pts), t)]) for t, r in zip(rule.nodes, radius)]
    )
    w = np.concatenate([wt * sub_w for wt in rule.weights])
    return pts, w


def _product_size(d: int, degree: int) -> int:
    size = degree + 1
    for _ in range(2, d + 1):
        size *= math.ceil((degree + 1) / 2)
    return size


def sphere_grid(d: int, ell: int, oversample: int = 1) -> SphereGrid:
    """Lưới tích phân hỗ trợ bậc ℓ.

    d = 2: (ℓ+1)·oversample vòng Gauss–Legendre × (2ℓ+2)·oversample kinh độ.
    d ≥ 3: quy tắc tích đệ quy chính xác tới bậc (ℓ+1)·oversample, giới hạn
    bởi `Config().MAX_GRID_NODES` (chi phí Cholesky bậc ba).
    """
    sphere_dim(d)
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    if oversample < 1:
        raise DomainError(f"oversample phải ≥ 1, nhận được {oversample}.")
    if d == 2:
        grid = _ring_grid(ell, oversample)
    else:
        degree = (ell + 1) * oversample
        size = _product_size(d, degree)
        budget = Config().MAX_GRID_NODES
        if size > budget:
            raise BudgetError(
                f"Lưới tích cho d={d}, ℓ={ell} cần {size} node, vượt HSL_MAX_GRID_NODES={budget}. "
                "Giảm ℓ hoặc tăng ngân sách."
            )
        pts, w = _product_nodes(d, degree)
        grid = SphereGrid(
            d=d,
            points=pts,
            weights=w,
            kind="product",
            spec={"kind": "product", "d": d, "ell": ell, "oversample": oversample},
            exact_degree=degree,
        )
    logger.debug("Lưới %s d=%s ℓ=%s: %s node", grid.kind, d, ell, grid.size)
    return grid


def subgrid(grid: SphereGrid, indices: Sequence[int]) -> SphereGrid:
    """Lưới con trên các node `indices` (trọng giữ nguyên, chỉ dùng để so sánh mẫu)."""
    idx = np.asarray(indices, dtype=int)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= grid.size:
        raise DomainError(f"Chỉ số lưới con nằm ngoài [0, {grid.size}).")
    return SphereGrid(
        d=grid.d,
        points=grid.points[idx],
        weights=grid.weights[idx],
        kind="subset",
        spec={"kind": "subset", "parent": grid.spec, "indices": idx.tolist()},
        exact_degree=0,
    )


def grid_from_spec(spec: Dict[str, Any]) -> SphereGrid:
    if spec["kind"] == "subset":
        return subgrid(grid_from_spec(spec["parent"]), spec["indices"])
    return sphere_grid(spec["d"], spec["ell"], spec.get("oversample", 1))


# ==================== Legendre liên kết ====================

def associated_legendre(ell: int, t: Union[float, np.ndarray]) -> np.ndarray:
    """P̄_ℓ^m(t) cho m = 0..ℓ, chuẩn hoá ∫_{−1}^{1} (P̄_ℓ^m)² dt = 1; shape (ℓ+1, *t.shape).

    Hồi quy theo bậc với m cố định (vector hoá theo m), không có pha Condon–Shortley.
    """
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    x = np.asarray(t, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise DomainError("Cần |t| ≤ 1.")
    x = np.clip(x, -1.0, 1.0)
    y = np.sqrt(1.0 - x * x)

    # Đường chéo P̄_m^m
    diag = np.empty((ell + 1,) + x.shape)
    diag[0] = 1.0 / math.sqrt(2.0)
    for m in range(1, ell + 1):
        diag[m] = math.sqrt(1.0 + 1.0 / (2 * m)) * y * diag[m - 1]
    if ell == 0:
        return diag

    # cur[m] = P̄_l^m, prev[m] = P̄_{l−1}^m; hàng m > l bằng 0
    shape = (-1,) + (1,) * x.ndim
    cur = np.zeros_like(diag)
    cur[0] = diag[0]
    prev = np.zeros_like(diag)
    for l in range(1, ell + 1):
        ms = np.arange(l, dtype=float)
        a = np.sqrt((4.0 * l * l - 1.0) / (l * l - ms * ms)).reshape(shape)
        if l >= 2:
            lp = float((l - 1) ** 2)
            b = np.sqrt(np.maximum(lp - ms * ms, 0.0) / (4.0 * lp - 1.0)).reshape(shape)
        else:
            b = np.zeros_like(a)
        nxt = np.zeros_like(diag)
        nxt[:l] = a * (x * cur[:l] - b * prev[:l])
        nxt[l] = diag[l]
        prev, cur = cur, nxt
    return cur


def _real_harmonic_scale(ell: int) -> np.ndarray:
    scale = np.full(ell + 1, 1.0 / math.sqrt(math.pi))
    scale[0] = 1.0 / math.sqrt(2.0 * math.pi)
    return scale


def real_harmonics(ell: int, points: np.ndarray) -> np.ndarray:
    """Ma trận (2ℓ+1, N) các Y_{ℓ,m} thực tại các điểm trên S² (thứ tự 0, 1c, 1s, 2c, …)."""
    pts = np.asarray(points, dtype=float)
    theta_t = np.clip(pts[:, 2], -1.0, 1.0)
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    plm = associated_legendre(ell, theta_t) * _real_harmonic_scale(ell)[:, None]
    out = np.empty((2 * ell + 1, pts.shape[0]))
    out[0] = plm[0]
    for m in range(1, ell + 1):
        out[2 * m - 1] = plm[m] * np.cos(m * phi)
        out[2 * m] = plm[m] * np.sin(m * phi)
    return out


# ==================== Realization ====================

@dataclass(eq=False)
class FieldRealization:
    grid: SphereGrid
    values: np.ndarray
    ell: int
    d: int
    backend: str
    seed: int
    stream_key: Tuple[int, ...] = ()
    coeffs: Optional[np.ndarray] = None

    def save(self, path: Union[str, Path]) -> Path:
        """Ghi `<path>.bin` (float64 little-endian, row-major) và sidecar `<path>.json`."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        bin_path = path.with_suffix(".bin")
        np.ascontiguousarray(self.values, dtype="<f8").reshape(1, -1).tofile(bin_path)
        sidecar = {
            "d": self.d,
            "ell": self.ell,
            "grid": self.grid.spec,
            "seed": self.seed,
            "stream_key": list(self.stream_key),
            "backend": self.backend,
            "shape": [1, int(self.values.size)],
            "dtype": "<f8",
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, ensure_ascii=False, indent=2), encoding="utf-8")
        return bin_path


def load_realization(path: Union[str, Path]) -> FieldRealization:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    values = np.fromfile(path.with_suffix(".bin"), dtype=meta.get("dtype", "<f8")).astype(float)
    grid = grid_from_spec(meta["grid"])
    if values.size != grid.size:
        raise DomainError(f"File {path} có {values.size} giá trị, lưới có {grid.size} node.")
    return FieldRealization(
        grid=grid,
        values=values,
        ell=meta["ell"],
        d=meta["d"],
        backend=meta["backend"],
        seed=meta["seed"],
        stream_key=tuple(meta.get("stream_key", ())),
    )


# ==================== Sinh trường ====================

def _check_degree(grid: SphereGrid, ell: int, backend: str) -> None:
    if grid.kind == "product" and ell > grid.exact_degree:
        raise GridDegreeError(f"Lưới tích chính xác tới bậc {grid.exact_degree}, không đủ cho ℓ={ell}.")
    if backend != "harmonic" or not grid.is_rings:
        return
    if grid.n_rings < ell + 1 or grid.n_az < 2 * ell + 1:
        raise GridDegreeError(
            f"Lưới {grid.n_rings} vòng × {grid.n_az} kinh độ không đủ cho ℓ={ell} "
            f"(cần ≥ {ell + 1} vòng, ≥ {2 * ell + 1} kinh độ)."
        )


def _resolve_backend(grid: SphereGrid, backend: str) -> str:
    if backend not in _BACKENDS:
        raise DomainError(f"Backend không hợp lệ: {backend!r}. Chọn trong {_BACKENDS}.")
    if backend == "auto":
        return "harmonic" if grid.d == 2 else "cholesky"
    if backend == "harmonic" and grid.d != 2:
        raise DomainError("Backend harmonic chỉ hỗ trợ d = 2; dùng cholesky cho d ≥ 3.")
    return backend


def _cholesky_factor(grid: SphereGrid, ell: int) -> np.ndarray:
    def build() -> np.ndarray:
        gram = np.clip(grid.points @ grid.points.T, -1.0, 1.0)
        cov = gegenbauer_eval(grid.d, ell, gram)
        for jitter in _JITTERS:
            try:
                factor = sla.cholesky(cov + jitter * np.eye(grid.size), lower=True, check_finite=False)
                if jitter:
                    logger.debug("Cholesky ℓ=%s thành công với jitter %.0e", ell, jitter)
                return factor
            except np.linalg.LinAlgError:
                continue
        raise FactorizationError(
            f"Cholesky thất bại cho ℓ={ell} trên {grid.size} node kể cả với jitter {_JITTERS[-1]:.0e}."
        )

    return grid.cached(("cholesky", ell), build)


def _ring_legendre(grid: SphereGrid, ell: int) -> np.ndarray:
    """P̄_ℓ^m(cosθ_i)·(chuẩn hoá Y) cho mọi vòng, shape (ℓ+1, n_rings)."""
    return grid.cached(
        ("legendre", ell),
        lambda: associated_legendre(ell, grid.cos_theta) * _real_harmonic_scale(ell)[:, None],
    )


def _synthesize(grid: SphereGrid, ell: int, a: np.ndarray) -> np.ndarray:
    """Σ_m a_m Y_{ℓ,m}(x_i) tại mọi node."""
    if grid.is_rings:
        plm = _ring_legendre(grid, ell)
        z = np.zeros((grid.n_rings, grid.n_az), dtype=complex)
        z[:, 0] = a[0] * plm[0]
        for m in range(1, ell + 1):
            z[:, m] = (a[2 * m - 1] - 1j * a[2 * m]) * plm[m]
        return (grid.n_az * np.fft.ifft(z, axis=1)).real.reshape(-1)
    basis = grid.cached(("harmonics", ell), lambda: real_harmonics(ell, grid.points))
    return a @ basis


def sample_field(
    d: int,
    ell: int,
    grid: SphereGrid,
    seed: int,
    backend: str = "auto",
    stream_key: Sequence[int] = (),
) -> FieldRealization:
    """Một realization của T_ℓ trên `grid`; tất định theo (seed, stream_key)."""
    if grid.d != d:
        raise DomainError(f"Lưới thuộc S^{grid.d}, không phải S^{d}.")
    if ell < 0:
        raise DomainError(f"ℓ phải ≥ 0, nhận được ell={ell}.")
    chosen = _resolve_backend(grid, backend)
    _check_degree(grid, ell, chosen)
    rng = stream(seed, *stream_key)
    n_ell = eigenspace_dim(d, ell)

    if chosen == "harmonic":
        a = rng.standard_normal(n_ell)
        scale = math.sqrt(sphere_dim(d).mu_d / n_ell)
        values = scale * _synthesize(grid, ell, a)
        coeffs = a
    else:
        factor = _cholesky_factor(grid, ell)
        values = factor @ rng.standard_normal(grid.size)
        coeffs = None

    return FieldRealization(
        grid=grid,
        values=values,
        ell=ell,
        d=d,
        backend=chosen,
        seed=seed,
        stream_key=tuple(int(k) for k in stream_key),
        coeffs=coeffs,
    )


# ==================== Phân tích ====================

def sh_project(realization: FieldRealization, psi: Callable[[np.ndarray], np.ndarray], ell: Optional[int] = None) -> float:
    """Σ_m (∫ ψ(T(x))·Y_{ℓ',m}(x) dx)² với ℓ' = `ell` (mặc định ℓ của realization).

    Chỉ hỗ trợ lưới vòng d = 2: FFT theo kinh độ rồi quadrature Gauss theo vĩ độ.
    """
    grid = realization.grid
    target = realization.ell if ell is None else ell
    if not grid.is_rings:
        raise GridDegreeError("sh_project cần lưới vòng Gauss–Legendre trên S².")
    if grid.n_rings < target + 1 or grid.n_az <= 2 * target:
        raise GridDegreeError(f"Lưới không đủ để chiếu lên bậc ℓ={target}.")
    f = np.asarray(psi(realization.values), dtype=float).reshape(grid.n_rings, grid.n_az)
    spectrum = np.fft.fft(f, axis=1)[:, : target + 1]
    plm = _ring_legendre(grid, target)
    weighted = plm * grid.ring_weights[None, :]
    cos_part = np.einsum("mr,rm->m", weighted, spectrum.real)
    sin_part = -np.einsum("mr,rm->m", weighted, spectrum.imag)
    energy = cos_part[0] ** 2 + float(np.sum(cos_part[1:] ** 2 + sin_part[1:] ** 2))
    return float(energy)


def kernel_quadratic_form(realization: FieldRealization, values: np.ndarray) -> float:
    """Σ_{i,j} w_i w_j v_i v_j G_{ℓ;d}(⟨x_i, x_j⟩), dạng dense trong ngân sách node."""
    grid = realization.grid
    budget = Config().DENSE_NODE_BUDGET
    if grid.size > budget:
        raise BudgetError(
            f"Dạng toàn phương dense cần {grid.size} node, vượt HSL_DENSE_NODE_BUDGET={budget}."
        )
    v = np.asarray(values, dtype=float) * grid.weights
    kernel = grid.cached(
        ("kernel", realization.ell),
        lambda: gegenbauer_eval(grid.d, realization.ell, np.clip(grid.points @ grid.points.T, -1.0, 1.0)),
    )
    return float(v @ kernel @ v)
