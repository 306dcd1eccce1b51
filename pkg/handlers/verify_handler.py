#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Handler cho subcommand `verify`: bộ tiêu chí nghiệm thu C1..C12.

Mỗi tiêu chí trả về `CriterionResult` (pass/fail/error, giá trị đo, ngưỡng,
thời gian chạy). Lỗi nghiệp vụ trong một tiêu chí không làm dừng các tiêu chí
khác; nó được ghi là `error` và tính là không đạt.

Profile `quick` thu nhỏ lưới ℓ và số replicate để chạy thử nhanh; ngưỡng
giữ nguyên nên kết quả `quick` chỉ mang tính tham khảo.

File ghi ra (`<out>/verify/`): `criteria.csv`, `verify_summary.json`.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Dict, List, Optional

from handlers.artifacts import RunContext, RunInterrupted
from handlers.diagram_handler import a_scan_records, oracle_rows
from handlers.graph_integral_handler import GAUNT_ELLS, band_nonincreasing, gaunt_rows, recovered_constants
from handlers.shared import distance_row, get_batch, phi_spec, spec_key
from numerics.distances_rates import RateSeries, rate_fit, theory_slope
from numerics.errors import HslError
from numerics.functionals_stats import analytic_moments, jackknife_variance, sigma_variance_scan
from numerics.graph_integrals import prop_I_scan
from numerics.sphere_basis import (
    LOG_BRANCH_COEFF,
    eigenspace_dim,
    log_branch_coefficient,
    moment_asymptote,
    reproducing_check,
    sphere_dim,
    sphere_moment,
)
from utils.rng import derive_seed

logger = logging.getLogger(__name__)

VERIFY_PHI = {"kind": "exponential", "params": {"t": 0.5}}
PURE_H2_PHI = {"kind": "hermite", "params": {"p": 2}}
_TV_REPEAT_KEY = 0x7E

PROFILES: Dict[str, Dict[str, Any]] = {
    "full": {
        "moment_dims": (2, 3, 4),
        "moment_ells": tuple(range(0, 201, 2)),
        "reproducing_ell_max": 64,
        "asymptote_ell": 200,
        "scan_ells": (4, 8, 16, 32, 64),
        "prop_ells": (4, 8, 16, 32, 64),
        "variance_ell": 128,
        "variance_reps": 10_000,
        "sigma_ells": (8, 16, 32, 64, 128, 256),
        "sigma_mc_ell": 16,
        "sigma_mc_reps": 2000,
        "var_sigma_ells": (8, 16, 32, 64),
        "var_sigma_reps": 2000,
        "rate_ells": (8, 16, 32, 64, 128),
        "rate_reps": 10_000,
        "tv_repeats": 3,
    },
    "quick": {
        "moment_dims": (2, 3, 4),
        "moment_ells": tuple(range(0, 41, 2)),
        "reproducing_ell_max": 16,
        "asymptote_ell": 200,
        "scan_ells": (4, 8),
        "prop_ells": (4, 8, 16),
        "variance_ell": 32,
        "variance_reps": 2000,
        "sigma_ells": (8, 16, 32, 64),
        "sigma_mc_ell": 8,
        "sigma_mc_reps": 500,
        "var_sigma_ells": (8, 16, 32, 64),
        "var_sigma_reps": 500,
        "rate_ells": (8, 16, 32, 64),
        "rate_reps": 2000,
        "tv_repeats": 3,
    },
}


@dataclass
class CriterionResult:
    id: str
    title: str
    status: str = "fail"
    measured: Dict[str, Any] = field(default_factory=dict)
    threshold: Dict[str, Any] = field(default_factory=dict)
    runtime_s: float = 0.0
    message: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "status": self.status,
            "measured": self.measured,
            "threshold": self.threshold,
            "runtime_s": round(self.runtime_s, 3),
            "message": self.message,
        }


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


# ==================== Tiêu chí thuần giải tích ====================

def exact_second_moment(dims, ells, tol: float) -> CriterionResult:
    worst = 0.0
    for d in dims:
        mu = sphere_dim(d).mu_d
        for ell in ells:
            exact = mu / eigenspace_dim(d, ell)
            worst = max(worst, abs(sphere_moment(d, ell, 2) - exact) / exact)
    return CriterionResult(
        "C1", "∫G² = μ_d/n_{ℓ;d}", _status(worst <= tol),
        {"max_rel_err": worst}, {"max_rel_err": tol},
    )


def reproducing(dims, ell_max: int, tol: float) -> CriterionResult:
    worst = max(reproducing_check(d, ell) for d in dims for ell in range(ell_max + 1))
    return CriterionResult(
        "C2", "Tính tái sinh của G", _status(worst <= tol),
        {"max_defect": worst}, {"max_defect": tol},
    )


def asymptotics(ell: int, tol: float, log_tol: float) -> CriterionResult:
    """Tỉ số moment/tiệm cận cho (2,3), (3,2); nhánh log (2,4) so hệ số của log ℓ.

    Ở nhánh log phần dư chỉ giảm như 1/log ℓ nên tỉ số với 12·log ℓ/(πℓ²) vẫn
    xa 1 tại ℓ = 200; tiêu chí dùng hệ số tăng trưởng giữa ℓ/2 và ℓ.
    """
    measured, ok = {}, True
    for name, (d, q) in {"d2_q3": (2, 3), "d3_q2": (3, 2)}.items():
        ratio = sphere_moment(d, ell, q) / moment_asymptote(d, q, ell)
        measured[name] = ratio
        ok = ok and abs(ratio - 1.0) <= tol
    coeff = log_branch_coefficient(ell)
    measured["d2_q4_ratio"] = sphere_moment(2, ell, 4) / moment_asymptote(2, 4, ell)
    measured["d2_q4_log_coeff"] = coeff
    ok = ok and abs(coeff / LOG_BRANCH_COEFF - 1.0) <= log_tol
    return CriterionResult(
        "C3", "Tiệm cận mô-men tại ℓ lớn", _status(ok),
        measured, {"rel": tol, "rel_log_coeff": log_tol, "log_coeff": LOG_BRANCH_COEFF, "ell": ell},
    )


# ==================== Handler ====================

class VerifyHandler:
    """Handler cho `verify`: chạy lần lượt C1..C12 và ghi kết quả máy đọc được."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.config = ctx.config
        self.profile = PROFILES[ctx.config.verify_profile]
        self.results: List[CriterionResult] = []

    async def handle(self) -> Dict[str, Any]:
        steps: List[Callable[[], Awaitable[CriterionResult]]] = [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6,
            self.c7, self.c8, self.c9, self.c10, self.c11, self.c12,
        ]
        try:
            for step in steps:
                self.results.append(await self._timed(step))
                self.ctx.checkpoint()
        finally:
            summary = await self._write_summary()
        passed = summary["passed"]
        return {
            "success": passed,
            "message": "Mọi tiêu chí đạt" if passed else f"Tiêu chí không đạt: {', '.join(summary['failed'])}",
            "data": summary,
        }

    async def _timed(self, step) -> CriterionResult:
        name = step.__name__.upper()
        started = time.perf_counter()
        try:
            result = await step()
        except RunInterrupted:
            raise
        except HslError as e:
            logger.error("Tiêu chí %s lỗi: %s", name, e)
            result = CriterionResult(name, "", status="error", message=str(e))
        except Exception as e:
            logger.exception("Tiêu chí %s lỗi không mong đợi", name)
            result = CriterionResult(name, "", status="error", message=f"{type(e).__name__}: {e}")
        result.runtime_s = time.perf_counter() - started
        logger.info("%s %s (%.1fs)", result.id, result.status.upper(), result.runtime_s)
        return result

    async def _write_summary(self) -> Dict[str, Any]:
        failed = [r.id for r in self.results if not r.passed]
        summary = {
            "profile": self.config.verify_profile,
            "config_hash": self.config.config_hash(),
            "complete": len(self.results) == 12,
            "passed": len(self.results) == 12 and not failed,
            "failed": failed,
            "criteria": [r.to_json() for r in self.results],
        }
        rows = [
            {"id": r.id, "title": r.title, "status": r.status, "runtime_s": round(r.runtime_s, 3),
             "measured": r.measured, "threshold": r.threshold, "message": r.message}
            for r in self.results
        ]
        await self.ctx.writer.csv("criteria.csv", rows)
        await self.ctx.writer.json("verify_summary.json", summary)
        return summary

    async def _cached(self, key: str, build, *args, **kwargs):
        return await self.ctx.cache_manager.get_or_compute(key, build, *args, **kwargs)

    # ==================== C1..C3 ====================

    async def c1(self) -> CriterionResult:
        p, cfg = self.profile, self.config
        return await self._cached(
            f"verify:c1:{cfg.verify_profile}", exact_second_moment,
            p["moment_dims"], p["moment_ells"], cfg.tol("moment_rel"),
        )

    async def c2(self) -> CriterionResult:
        p, cfg = self.profile, self.config
        return await self._cached(
            f"verify:c2:{cfg.verify_profile}", reproducing,
            p["moment_dims"], p["reproducing_ell_max"], cfg.tol("reproducing"),
        )

    async def c3(self) -> CriterionResult:
        p, cfg = self.profile, self.config
        return await self._cached(
            f"verify:c3:{p['asymptote_ell']}", asymptotics,
            p["asymptote_ell"], cfg.tol("asymptote_rel"), cfg.tol("asymptote_log_rel"),
        )

    # ==================== C4..C7 ====================

    async def c4(self) -> CriterionResult:
        cfg = self.config
        rows = await self._cached(
            f"oracle:{cfg.diagram_q_max}:{cfg.diagram_cov_samples}:{cfg.seed}",
            oracle_rows, cfg.diagram_q_max, cfg.diagram_cov_samples, cfg.seed,
        )
        mismatches = [r for r in rows if not r["equal"]]
        return CriterionResult(
            "C4", "Công thức diagram ≡ oracle Isserlis", _status(not mismatches),
            {"cases": len(rows), "mismatches": len(mismatches),
             "first_mismatch": mismatches[0] if mismatches else None},
            {"mismatches": 0},
        )

    async def c5(self) -> CriterionResult:
        cfg = self.config
        records: List[Dict[str, Any]] = []
        for ell in self.profile["scan_ells"]:
            records.extend(await self._cached(
                f"ascan:2:{ell}:{cfg.diagram_q_max}:{cfg.mc_samples}:{cfg.seed}",
                a_scan_records, 2, [ell], cfg.diagram_q_max, cfg.mc_samples, cfg.seed,
            ))
            self.ctx.checkpoint()
        violations = [r for r in records if r["violation"]]
        return CriterionResult(
            "C5", "Cận cây khung cho ∫∏G^{2k_ij}", _status(not violations),
            {"records": len(records), "violations": len(violations),
             "mc_records": sum(r["method"] == "mc" for r in records)},
            {"violations": 0, "ells": list(self.profile["scan_ells"])},
        )

    async def c6(self) -> CriterionResult:
        tol = self.config.tol("gaunt_rel")
        rows = await self._cached("gaunt:2:4", gaunt_rows, 2, GAUNT_ELLS)
        constants = recovered_constants(2, rows)
        ok = len(constants) == 3 and all(
            c["spread"] <= tol and c["rel_dev"] <= tol for c in constants.values()
        )
        return CriterionResult(
            "C6", "Hằng số Gaunt ổn định", _status(ok),
            constants, {"spread": tol, "rel_dev": tol},
        )

    async def c7(self) -> CriterionResult:
        cfg = self.config
        ells = list(self.profile["prop_ells"])
        ell_key = ",".join(map(str, ells))
        scan = await self._cached(
            f"propI:2:{ell_key}:{cfg.q_max}:{cfg.mc_samples}:{cfg.seed}",
            prop_I_scan, ells, cfg.q_max, cfg.mc_samples, cfg.seed, 2,
        )
        maxima = [scan.max_per_ell[ell] for ell in ells]
        band_ok = band_nonincreasing(maxima, cfg.tol("prop_i_band"))
        bad_mc = sum(not r["mc_ok"] for r in scan.rows)
        return CriterionResult(
            "C7", "max ℓ³|𝔍| bị chặn", _status(band_ok and bad_mc == 0),
            {"max_per_ell": {str(e): m for e, m in zip(ells, maxima)}, "band_ok": band_ok,
             "mc_cells": sum(r["method"] == "mc" for r in scan.rows), "mc_cells_over_se": bad_mc,
             "R_histogram": {str(k): v for k, v in scan.r_histogram.items()}},
            {"band": cfg.tol("prop_i_band"), "mc_rel_se": cfg.tol("mc_rel_se")},
        )

    # ==================== C8..C12 (Monte Carlo) ====================

    async def c8(self) -> CriterionResult:
        cfg, p = self.config, self.profile
        spec = phi_spec(VERIFY_PHI)
        ell = p["variance_ell"]
        batch = await get_batch(self.ctx, spec, ell, p["variance_reps"], cfg.seed, with_sigma=False, d=2)
        var, se = jackknife_variance([s.X for s in batch.samples])
        m = batch.moments
        k = cfg.tol("mc_sigmas")
        mc_ok = abs(var - m.variance) <= k * se
        asym_rel = abs(m.variance / m.variance_asymptote - 1.0)
        asym_ok = asym_rel <= cfg.tol("variance_asymptote_rel")
        return CriterionResult(
            "C8", "Luật phương sai của X_ℓ", _status(mc_ok and asym_ok),
            {"ell": ell, "mc_variance": var, "mc_se": se, "analytic_variance": m.variance,
             "asymptote": m.variance_asymptote, "asymptote_rel_dev": asym_rel},
            {"mc_sigmas": k, "asymptote_rel": cfg.tol("variance_asymptote_rel")},
        )

    async def c9(self) -> CriterionResult:
        cfg, p = self.config, self.profile
        h2 = phi_spec(PURE_H2_PHI)
        exp_spec = phi_spec(VERIFY_PHI)
        h2_dev = max(abs(analytic_moments(2, ell, h2).sigma_mean - 2.0) for ell in p["sigma_ells"])
        batch = await get_batch(self.ctx, h2, p["sigma_mc_ell"], p["sigma_mc_reps"], cfg.seed, with_sigma=True, d=2)
        s = batch.sigma_stats
        k = cfg.tol("mc_sigmas")
        mc_ok = abs(s.mean - 2.0) <= k * s.std_error

        scaled = {}
        for ell in p["sigma_ells"]:
            m = await self._cached(
                f"analytic:2:{ell}:{spec_key(exp_spec)}", analytic_moments, 2, ell, exp_spec,
            )
            scaled[str(ell)] = abs(m.sigma_mean - 2.0) / m.eta_rate
        values = list(scaled.values())
        ratio = max(values) / min(values) if min(values) > 0 else math.inf
        ok = h2_dev <= cfg.tol("sigma_mean_abs") and mc_ok and ratio <= cfg.tol("eta_ratio")
        return CriterionResult(
            "C9", "E[σ_ℓ] → 2 với tốc độ η_{ℓ;d}", _status(ok),
            {"h2_analytic_max_dev": h2_dev, "h2_mc_mean": s.mean, "h2_mc_se": s.std_error,
             "scaled_deviation": scaled, "max_min_ratio": ratio},
            {"h2_abs": cfg.tol("sigma_mean_abs"), "mc_sigmas": k, "max_min_ratio": cfg.tol("eta_ratio")},
        )

    async def c10(self) -> CriterionResult:
        cfg, p = self.config, self.profile
        spec = phi_spec(VERIFY_PHI)
        ells = list(p["var_sigma_ells"])
        series = await self._cached(
            f"varsigma:2:{','.join(map(str, ells))}:{spec_key(spec)}:{p['var_sigma_reps']}:{cfg.seed}",
            sigma_variance_scan, 2, ells, spec, p["var_sigma_reps"], cfg.seed,
            oversample=cfg.oversample, threads=cfg.threads, backend=cfg.backend,
        )
        tol = cfg.tol("var_sigma_slope_tol")
        ok = series.slope is not None and abs(series.slope - series.theory_slope) <= tol
        return CriterionResult(
            "C10", "Var(σ_ℓ) = O(ℓ^{-1})", _status(ok),
            series.to_json(), {"slope": series.theory_slope, "tol": tol},
        )

    async def _rate_rows(self, seed: int) -> List[Dict[str, Any]]:
        p = self.profile
        spec = phi_spec(VERIFY_PHI)
        rows = []
        for ell in p["rate_ells"]:
            batch = await get_batch(self.ctx, spec, ell, p["rate_reps"], seed, with_sigma=False, d=2)
            rows.append(await self._cached(
                f"distance:2:{ell}:{spec_key(spec)}:{p['rate_reps']}:{seed}",
                distance_row, ell, [s.Xtilde for s in batch.samples], seed,
            ))
            self.ctx.checkpoint()
        return rows

    async def c11(self) -> CriterionResult:
        cfg = self.config
        rows = await self._rate_rows(cfg.seed)
        series = RateSeries(statistic="w1_xtilde", d=2, theory_slope=theory_slope("w1_xtilde", 2))
        for row in rows:
            series.add(row["ell"], row["w1"], row["w1_err"])
        rate_fit(series)
        tol = cfg.tol("w1_slope_tol")
        ok = abs(series.slope - series.theory_slope) <= tol
        return CriterionResult(
            "C11", "Tốc độ W1 của X̃_ℓ", _status(ok),
            series.to_json(), {"slope": series.theory_slope, "tol": tol},
        )

    async def c12(self) -> CriterionResult:
        cfg, p = self.config, self.profile
        seeds = [cfg.seed] + [derive_seed(cfg.seed, _TV_REPEAT_KEY, r) for r in range(1, p["tv_repeats"])]
        per_repeat = []
        for seed in seeds:
            per_repeat.append([row["tv_proxy"] for row in await self._rate_rows(seed)])
        medians = [float(sorted(col)[len(col) // 2]) for col in zip(*per_repeat)]
        ok = all(b < a for a, b in zip(medians, medians[1:]))
        return CriterionResult(
            "C12", "Proxy TV giảm ngặt theo ℓ", _status(ok),
            {"ells": list(p["rate_ells"]), "median_tv_proxy": medians, "repeats": len(seeds)},
            {"strictly_decreasing": True},
        )
