#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Handler cho subcommand `rates`.

Với mỗi ℓ: W1(X̃_ℓ, Z) kèm sai số bootstrap, proxy TV làm trơn, E|σ_ℓ − 2| và
Var(σ_ℓ) (jackknife). Sau đó fit log-log cho từng chuỗi và so với số mũ lý thuyết.

File ghi ra (`<out>/rates/`): `rates.csv`, `fits.json`, `summary.json`.
"""

import asyncio
import logging
from typing import Any, Dict, List

import numpy as np

from handlers.artifacts import RunContext
from handlers.shared import distance_row, get_batch, phi_spec
from numerics.distances_rates import RateSeries, rate_fit, theory_slope
from numerics.errors import HslError
from numerics.functionals_stats import MIN_SCAN_REPS, jackknife_variance

logger = logging.getLogger(__name__)

RATE_COLUMNS = [
    "ell", "n_samples", "w1", "w1_err", "tv_proxy", "bandwidth",
    "w1_sigma", "var_sigma", "var_sigma_err",
]
_FIT_MIN_POINTS = 4


def rate_row(batch, seed: int) -> Dict[str, Any]:
    xtilde = [s.Xtilde for s in batch.samples]
    row = distance_row(batch.ell, xtilde, seed)
    sigma = np.array([s.sigma for s in batch.samples if s.sigma is not None], dtype=float)
    row["w1_sigma"] = float(np.mean(np.abs(sigma - 2.0))) if sigma.size else None
    if sigma.size >= MIN_SCAN_REPS:
        row["var_sigma"], row["var_sigma_err"] = jackknife_variance(sigma)
    else:
        row["var_sigma"] = row["var_sigma_err"] = None
    return row


def build_fits(d: int, rows: List[Dict[str, Any]]) -> Dict[str, Dict[str, Any]]:
    """Một RateSeries cho mỗi thống kê; fit khi đủ điểm dương."""
    columns = {
        "w1_xtilde": ("w1", "w1_err"),
        "tv_xtilde": ("tv_proxy", None),
        "w1_sigma": ("w1_sigma", None),
        "var_sigma": ("var_sigma", "var_sigma_err"),
    }
    fits = {}
    for statistic, (col, err_col) in columns.items():
        series = RateSeries(statistic=statistic, d=d, theory_slope=theory_slope(statistic, d))
        for row in rows:
            if row.get(col) is None:
                continue
            series.add(row["ell"], row[col], row.get(err_col, float("nan")) if err_col else float("nan"))
        if len(series.ell) >= _FIT_MIN_POINTS and all(y > 0 for y in series.y):
            rate_fit(series)
        else:
            logger.warning("Chuỗi %s có %s điểm dương, không fit.", statistic, len(series.ell))
        fits[statistic] = series.to_json()
    return fits


class RatesHandler:
    """Handler cho `rates`: chuỗi khoảng cách theo ℓ và slope log-log."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.config = ctx.config

    async def handle(self) -> Dict[str, Any]:
        cfg = self.config
        rows: List[Dict[str, Any]] = []
        try:
            spec = phi_spec(cfg.phi)
            for ell in cfg.ell_list:
                batch = await get_batch(self.ctx, spec, ell, cfg.reps, cfg.seed, with_sigma=True)
                rows.append(await asyncio.to_thread(rate_row, batch, cfg.seed))
                logger.info("ℓ=%s: W1=%.4e, TV proxy=%.4e", ell, rows[-1]["w1"], rows[-1]["tv_proxy"])
                self.ctx.checkpoint()
            await self.ctx.writer.csv("rates.csv", rows, RATE_COLUMNS)
            fits = build_fits(cfg.d, rows)
            await self.ctx.writer.json("fits.json", fits)
            summary = {
                statistic: {"slope": f["slope"], "slope_se": f["slope_se"], "theory_slope": f["theory_slope"]}
                for statistic, f in fits.items()
            }
            await self.ctx.writer.json("summary.json", summary)
            return {"success": True, "message": "Đã đo tốc độ hội tụ", "data": {"rows": rows, "fits": fits}}
        except HslError as e:
            logger.error("Rates error: %s", e)
            return {"success": False, "message": f"Lỗi khi đo tốc độ: {e}", "data": None}
        finally:
            if rows and self.ctx.stop_event.is_set():
                await self.ctx.writer.csv("rates.csv", rows, RATE_COLUMNS)
