#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Phiếm hàm X_ℓ = ∫ φ(T_ℓ(x)) dx, chuẩn hoá X̃_ℓ, hình chiếu chaos và hiệp phương sai
Malliavin σ_ℓ, cùng các công thức giải tích mà chúng được đối chiếu.

σ_ℓ = (1/v²)·∬ ψ(T(x))ψ(T(z))·G_{ℓ;d}(⟨x, z⟩) dx dz với ψ(u) = Σ_{q≥2} b_q H_{q−1}(u)/(q−1)!
(chuỗi kép đã gộp thành một hàm điểm). Trên lưới vòng d = 2 tính bằng phân tích
điều hoà: σ_ℓ = μ_d/(n_ℓ v²)·Σ_m (∫ ψ(T) Y_m)²; ngược lại dùng dạng toàn phương dense.

Replicate r của ℓ dùng luồng RNG (seed, ℓ, r) nên kết quả không phụ thuộc số thread.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from numerics.diagram_engine import split_N_C
from numerics.distances_rates import RateSeries, rate_fit, theory_slope
from numerics.errors import DomainError
from numerics.field_sampler import (
    FieldRealization,
    SphereGrid,
    kernel_quadratic_form,
    sh_project,
    sample_field,
    sphere_grid,
)
from numerics.graph_integrals import four_point_integral
from numerics.hermite_chaos import ChaosSpec, derivative_series, hermite_eval, require_certified
from numerics.sphere_basis import eigenspace_dim, sphere_dim, sphere_moment
from utils.running_stats import RunningStats

logger = logging.getLogger(__name__)

MIN_SCAN_REPS = 500
JACKKNIFE_BLOCKS = 20
DEFAULT_SHARD = 250

PhiLike = Union[ChaosSpec, Callable[[np.ndarray], np.ndarray]]


# ==================== Kiểu dữ liệu ====================

@dataclass
class StatSample:
    ell: int
    seed: int
    replicate: int
    X: float
    Xtilde: float
    sigma: Optional[float] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "ell": self.ell,
            "seed": self.seed,
            "replicate": self.replicate,
            "X": self.X,
            "Xtilde": self.Xtilde,
            "sigma": self.sigma,
        }


@dataclass
class AnalyticMoments:
    d: int
    ell: int
    mean: float
    variance: float
    shares: Dict[int, float]
    sigma_mean: float
    eta_rate: float
    variance_asymptote: float

    def to_json(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "ell": self.ell,
            "mean": self.mean,
            "variance": self.variance,
            "shares": {str(q): v for q, v in self.shares.items()},
            "sigma_mean": self.sigma_mean,
            "eta_rate": self.eta_rate,
            "variance_asymptote": self.variance_asymptote,
        }


@dataclass
class BatchResult:
    d: int
    ell: int
    moments: AnalyticMoments
    samples: List[StatSample]
    x_stats: RunningStats = field(default_factory=RunningStats)
    xtilde_stats: RunningStats = field(default_factory=RunningStats)
    sigma_stats: RunningStats = field(default_factory=RunningStats)

    def summary(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "ell": self.ell,
            "reps": len(self.samples),
            "moments": self.moments.to_json(),
            "X": self.x_stats.to_json(),
            "Xtilde": self.xtilde_stats.to_json(),
            "sigma": self.sigma_stats.to_json() if self.sigma_stats.count else None,
        }


@dataclass
class DiagramVariance:
    d: int
    ell: int
    value: float
    abs_err: float
    q_max: int
    terms: int
    mc_terms: int


# ==================== Phiếm hàm ====================

def _phi_values(phi: PhiLike, values: np.ndarray) -> np.ndarray:
    if isinstance(phi, ChaosSpec):
        return np.asarray(phi.evaluate(values), dtype=float)
    if callable(phi):
        return np.asarray(phi(values), dtype=float)
    raise DomainError(f"φ phải là ChaosSpec hoặc callable, nhận được {type(phi).__name__}.")


def integrate_functional(realization: FieldRealization, phi: PhiLike) -> float:
    """X_ℓ = Σ_i w_i·φ(T(x_i))."""
    return float(np.dot(realization.grid.weights, _phi_values(phi, realization.values)))


def _eta(d: int, ell: int, b4: float) -> float:
    if d == 2 and b4 != 0.0:
        return math.log(ell) / ell
    return 1.0 / ell


def analytic_moments(d: int, ell: int, spec: ChaosSpec) -> AnalyticMoments:
    """Kỳ vọng, phương sai (tách theo q), E[σ_ℓ] và η_{ℓ;d}.

    Raise `TruncationError` khi đuôi chuỗi chaos chưa được chứng nhận.
    """
    require_certified(spec)
    if ell < 1:
        raise DomainError(f"Cần ℓ ≥ 1, nhận được ell={ell}.")
    mu = sphere_dim(d).mu_d
    shares: Dict[int, float] = {}
    sigma_num = 0.0
    for q in range(2, spec.Q + 1):
        b = spec.b(q)
        if b == 0.0:
            shares[q] = 0.0
            continue
        two_point = mu * sphere_moment(d, ell, q)
        shares[q] = b * b / math.factorial(q) * two_point
        sigma_num += b * b / math.factorial(q - 1) * two_point
    variance = float(sum(shares.values()))
    if variance <= 0.0:
        raise DomainError("Phương sai giải tích bằng 0: φ không có thành phần chaos bậc ≥ 2.")
    n = eigenspace_dim(d, ell)
    return AnalyticMoments(
        d=d,
        ell=ell,
        mean=spec.b(0) * mu,
        variance=variance,
        shares=shares,
        sigma_mean=sigma_num / variance,
        eta_rate=_eta(d, ell, spec.b(4)),
        variance_asymptote=spec.b(2) ** 2 / 2.0 * mu * mu / n,
    )


def standardize(X: Union[float, np.ndarray], moments: AnalyticMoments):
    """X̃_ℓ = (X_ℓ − m)/v theo phương sai giải tích (không dùng phương sai mẫu)."""
    return (X - moments.mean) / math.sqrt(moments.variance)


def chaos_projection(realization: FieldRealization, q: int, spec: ChaosSpec) -> float:
    """X_ℓ[q] = (b_q/q!)·Σ_i w_i H_q(T(x_i))."""
    if q < 0:
        raise DomainError(f"q phải ≥ 0, nhận được q={q}.")
    b = spec.b(q)
    if b == 0.0:
        return 0.0
    h = hermite_eval(q, realization.values)
    return float(b / math.factorial(q) * np.dot(realization.grid.weights, h))


def _psi(spec: ChaosSpec, values: np.ndarray) -> np.ndarray:
    return np.asarray(derivative_series(spec, 1, values, min_order=2), dtype=float)


def sigma_sample(
    realization: FieldRealization,
    spec: ChaosSpec,
    moments: Optional[AnalyticMoments] = None,
    path: str = "auto",
) -> float:
    """σ_ℓ của một realization; `path` là `spectral`, `dense` hoặc `auto`."""
    if moments is None:
        moments = analytic_moments(realization.d, realization.ell, spec)
    if path == "auto":
        path = "spectral" if realization.grid.is_rings else "dense"
    if path == "spectral":
        energy = sh_project(realization, lambda u: _psi(spec, u))
        n = eigenspace_dim(realization.d, realization.ell)
        return sphere_dim(realization.d).mu_d / (n * moments.variance) * energy
    if path == "dense":
        psi = _psi(spec, realization.values)
        return kernel_quadratic_form(realization, psi) / moments.variance
    raise DomainError(f"path không hợp lệ: {path!r}. Chọn spectral, dense hoặc auto.")


# ==================== Mô phỏng ====================

def _check_even(ell_list: Sequence[int]) -> None:
    for ell in ell_list:
        if ell < 2 or ell % 2:
            raise DomainError(f"Thí nghiệm chỉ chạy ℓ chẵn ≥ 2, nhận được ell={ell}.")


def _shards(reps: int, shard_size: int) -> List[range]:
    return [range(s, min(s + shard_size, reps)) for s in range(0, reps, shard_size)]


def simulate_batch(
    d: int,
    ell: int,
    spec: ChaosSpec,
    reps: int,
    seed: int,
    grid: Optional[SphereGrid] = None,
    backend: str = "auto",
    oversample: int = 1,
    with_sigma: bool = True,
    threads: int = 1,
    shard_size: int = DEFAULT_SHARD,
) -> BatchResult:
    """`reps` replicate độc lập của (X_ℓ, X̃_ℓ, σ_ℓ) tại một ℓ.

    Replicate chia thành shard cố định; shard chạy trên pool `threads` worker và
    được gộp theo thứ tự, nên kết quả giống hệt nhau với mọi số thread.
    """
    _check_even([ell])
    if reps < 1:
        raise DomainError(f"reps phải ≥ 1, nhận được {reps}.")
    moments = analytic_moments(d, ell, spec)
    grid = grid if grid is not None else sphere_grid(d, ell, oversample)

    def run_shard(replicates: range) -> List[StatSample]:
        out = []
        for r in replicates:
            field_ = sample_field(d, ell, grid, seed, backend=backend, stream_key=(ell, r))
            X = integrate_functional(field_, spec)
            sigma = sigma_sample(field_, spec, moments) if with_sigma else None
            out.append(StatSample(ell=ell, seed=seed, replicate=r, X=X, Xtilde=standardize(X, moments), sigma=sigma))
        return out

    shards = _shards(reps, shard_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="rep") as pool:
            parts = list(pool.map(run_shard, shards))
    else:
        parts = [run_shard(s) for s in shards]

    result = BatchResult(d=d, ell=ell, moments=moments, samples=[])
    for part in parts:
        result.samples.extend(part)
        result.x_stats.merge(RunningStats.from_samples([s.X for s in part]))
        result.xtilde_stats.merge(RunningStats.from_samples([s.Xtilde for s in part]))
        if with_sigma:
            result.sigma_stats.merge(RunningStats.from_samples([s.sigma for s in part]))
    logger.info(
        "ℓ=%s: %s replicate, E[X̃]=%.4f, Var[X̃]=%.4f",
        ell, reps, result.xtilde_stats.mean, result.xtilde_stats.variance,
    )
    return result


def jackknife_variance(values: Sequence[float], blocks: int = JACKKNIFE_BLOCKS) -> tuple:
    """(phương sai mẫu, sai số chuẩn jackknife theo khối liền kề)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2 * blocks:
        raise DomainError(f"Jackknife {blocks} khối cần ít nhất {2 * blocks} giá trị, có {x.size}.")
    full = float(np.var(x, ddof=1))
    parts = np.array_split(np.arange(x.size), blocks)
    loo = np.array([np.var(np.delete(x, idx), ddof=1) for idx in parts])
    se = math.sqrt((blocks - 1) / blocks * float(np.sum((loo - loo.mean()) ** 2)))
    return full, se


def sigma_variance_scan(
    d: int,
    ell_list: Sequence[int],
    spec: ChaosSpec,
    reps: int,
    seed: int,
    oversample: int = 1,
    threads: int = 1,
    backend: str = "auto",
) -> RateSeries:
    """Var(σ_ℓ) Monte Carlo theo ℓ, thanh sai số jackknife và slope log-log."""
    _check_even(ell_list)
    if reps < MIN_SCAN_REPS:
        raise DomainError(f"Quét Var(σ_ℓ) cần reps ≥ {MIN_SCAN_REPS}, nhận được {reps}.")
    series = RateSeries(statistic="var_sigma", d=d, theory_slope=theory_slope("var_sigma", d))
    for ell in sorted(ell_list):
        batch = simulate_batch(
            d, ell, spec, reps, seed, backend=backend, oversample=oversample, threads=threads,
        )
        var, se = jackknife_variance([s.sigma for s in batch.samples])
        series.add(ell, var, se)
        logger.info("ℓ=%s: Var(σ)=%.4e ± %.2e", ell, var, se)
    if len(series.ell) >= 4:
        rate_fit(series)
    return series


def sigma_variance_diagram(
    d: int,
    ell: int,
    spec: ChaosSpec,
    q_max: int,
    mc_samples: int = 100_000,
    seed: int = 12345,
) -> DiagramVariance:
    """Var(σ_ℓ) từ công thức diagram trên 𝒞, cắt chuỗi chaos tại q_max.

    Var = (1/v⁴)·Σ_q ∏_i b_{q_i} Σ_{κ∈𝒞_{q−1}} ∏_{i<j} 1/k_ij! · ∫ ∏G^{k_ij}·G_{12}G_{34}.
    """
    if q_max < 2:
        raise DomainError(f"q_max phải ≥ 2, nhận được {q_max}.")
    moments = analytic_moments(d, ell, spec)
    total, err2, terms, mc_terms = 0.0, 0.0, 0, 0
    pair_cache: Dict = {}
    for q in itertools.product(range(2, q_max + 1), repeat=4):
        coef = math.prod(spec.b(v) for v in q)
        if coef == 0.0:
            continue
        _, c_set = split_N_C([v - 1 for v in q])
        for kappa in c_set:
            weight = coef / math.prod(math.factorial(k) for _, _, k in kappa.upper())
            est = four_point_integral(d, ell, kappa, mc_samples=mc_samples, seed=seed, pair_cache=pair_cache)
            total += weight * est.value
            err2 += (weight * est.abs_err) ** 2
            terms += 1
            mc_terms += est.method == "mc"
    v4 = moments.variance ** 2
    logger.info("Var(σ_ℓ) diagram ℓ=%s: %s số hạng (%s MC)", ell, terms, mc_terms)
    return DiagramVariance(
        d=d, ell=ell, value=total / v4, abs_err=math.sqrt(err2) / v4,
        q_max=q_max, terms=terms, mc_terms=mc_terms,
    )
