#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Handler cho subcommand `simulate`.

Với mỗi ℓ trong config: `reps` realization của trường, X_ℓ, X̃_ℓ và σ_ℓ.
Realization đầu tiên của mỗi ℓ được lưu dạng `.bin` + sidecar `.json` để
kiểm tra lại ngoài chương trình.

File ghi ra (`<out>/simulate/`):
- `samples_ell<ℓ>.jsonl`: {ell, seed, replicate, X, Xtilde, sigma}
- `batch_summary.csv`: trung bình / phương sai mẫu so với giá trị giải tích
- `field_ell<ℓ>.bin` + `.json`
- `summary.json`
"""

import asyncio
import logging
import math
from typing import Any, Dict, List

from handlers.artifacts import RunContext
from handlers.shared import get_batch, phi_spec
from numerics.errors import HslError
from numerics.field_sampler import sample_field, sphere_grid
from numerics.functionals_stats import BatchResult

logger = logging.getLogger(__name__)


def summary_row(batch: BatchResult) -> Dict[str, Any]:
    m = batch.moments
    x, s = batch.x_stats, batch.sigma_stats
    # SE của phương sai mẫu dưới giả thiết gần Gauss
    var_se = x.variance * math.sqrt(2.0 / max(x.count - 1, 1))
    return {
        "ell": batch.ell,
        "reps": x.count,
        "X_mean": x.mean,
        "X_mean_se": x.std_error,
        "mean_analytic": m.mean,
        "X_var": x.variance,
        "X_var_se": var_se,
        "var_analytic": m.variance,
        "var_asymptote": m.variance_asymptote,
        "sigma_mean": s.mean if s.count else None,
        "sigma_mean_se": s.std_error if s.count else None,
        "sigma_mean_analytic": m.sigma_mean,
        "eta_rate": m.eta_rate,
    }


class SimulateHandler:
    """Handler cho `simulate`: batch realization và thống kê (X, X̃, σ)."""

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
                await self.ctx.writer.jsonl(f"samples_ell{ell}.jsonl", (s.to_json() for s in batch.samples))
                rows.append(summary_row(batch))
                await self._save_field(ell)
                self.ctx.checkpoint()
            await self.ctx.writer.csv("batch_summary.csv", rows)
            summary = {"d": cfg.d, "reps": cfg.reps, "rows": rows}
            await self.ctx.writer.json("summary.json", summary)
            return {"success": True, "message": "Đã mô phỏng xong", "data": summary}
        except HslError as e:
            logger.error("Simulate error: %s", e)
            return {"success": False, "message": f"Lỗi khi mô phỏng: {e}", "data": None}
        finally:
            if rows and self.ctx.stop_event.is_set():
                await self.ctx.writer.csv("batch_summary.csv", rows)

    async def _save_field(self, ell: int) -> None:
        cfg = self.config

        def build():
            grid = sphere_grid(cfg.d, ell, cfg.oversample)
            field_ = sample_field(cfg.d, ell, grid, cfg.seed, backend=cfg.backend, stream_key=(ell, 0))
            return field_.save(self.ctx.writer.path(f"field_ell{ell}.bin"))

        path = await asyncio.to_thread(build)
        await self.ctx.writer.raw(str(path))
        await self.ctx.writer.raw(str(path.with_suffix(".json")))
