#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Phép tính đắt dùng chung giữa các handler, đi qua cache.

Key có dạng `<namespace>:<tham số>`; cùng tham số thì dùng lại kết quả,
vd batch ℓ = 128 của `verify` phục vụ cả tiêu chí phương sai lẫn tốc độ W1.
Phần tính toán chạy trong thread (xem `CacheManager.get_or_compute`).
"""

import logging
from typing import Any, Dict, List, Optional

from numerics.distances_rates import (
    bootstrap_se,
    silverman_bandwidth,
    smoothed_tv_to_gauss,
    wasserstein1_to_gauss,
)
from numerics.functionals_stats import BatchResult, simulate_batch
from numerics.hermite_chaos import ChaosSpec, chaos_coeffs
from utils.utils import canonical_json, sha256_hex

logger = logging.getLogger(__name__)

BOOTSTRAP_B = 200


def phi_spec(phi: Dict[str, Any]) -> ChaosSpec:
    return chaos_coeffs(phi)


def spec_key(spec: ChaosSpec) -> str:
    return sha256_hex(canonical_json(spec.to_json()))[:16]


async def get_batch(
    ctx, spec: ChaosSpec, ell: int, reps: int, seed: int, with_sigma: bool, d: Optional[int] = None,
) -> BatchResult:
    cfg = ctx.config
    d = cfg.d if d is None else d
    key = (
        f"batch:{d}:{ell}:{spec_key(spec)}:{reps}:{seed}:{cfg.oversample}:"
        f"{cfg.backend}:{int(with_sigma)}"
    )
    if not with_sigma:
        # batch có σ dùng được cho yêu cầu không cần σ
        richer = await ctx.cache_manager.get(key[:-1] + "1")
        if richer:
            return richer.get("data")
    return await ctx.cache_manager.get_or_compute(
        key, simulate_batch,
        d, ell, spec, reps, seed,
        backend=cfg.backend, oversample=cfg.oversample,
        with_sigma=with_sigma, threads=cfg.threads,
    )


def distance_row(ell: int, xtilde: List[float], seed: int) -> Dict[str, Any]:
    """Một dòng bảng tốc độ: W1 (kèm sai số bootstrap) và proxy TV làm trơn."""
    n = len(xtilde)
    return {
        "ell": ell,
        "n_samples": n,
        "w1": wasserstein1_to_gauss(xtilde),
        "w1_err": bootstrap_se(xtilde, wasserstein1_to_gauss, B=BOOTSTRAP_B, seed=seed),
        "tv_proxy": smoothed_tv_to_gauss(xtilde),
        "bandwidth": silverman_bandwidth(n),
    }
