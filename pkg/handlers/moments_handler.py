#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Handler cho subcommand `moments`.

Bảng ∫G^q đúng (quadrature) so với dạng tiệm cận, sai số đồng nhất thức bậc 2
và tính tái sinh, cùng mô-men giải tích của X_ℓ cho φ trong config.

File ghi ra (`<out>/moments/`):
- `sphere_moments.csv`: ell, q, moment, asymptote, ratio, exact_rel_err (q = 2)
- `identities.csv`: ell, reproducing_defect, orthogonality_defect
- `analytic_moments.jsonl`: mean, variance (tách theo q), E[σ_ℓ], η_{ℓ;d}
- `summary.json`
"""

import logging
from typing import Any, Dict, List, Optional

from handlers.artifacts import RunContext
from handlers.shared import phi_spec, spec_key
from numerics.errors import HslError
from numerics.functionals_stats import analytic_moments
from numerics.hermite_chaos import check_assumption
from numerics.sphere_basis import (
    eigenspace_dim,
    moment_asymptote,
    orthogonality_defect,
    reproducing_check,
    sphere_dim,
    sphere_moment,
)

logger = logging.getLogger(__name__)


def moment_rows(d: int, ell_list: List[int], q_max: int) -> List[Dict[str, Any]]:
    mu = sphere_dim(d).mu_d
    rows = []
    for ell in ell_list:
        for q in range(2, q_max + 1):
            value = sphere_moment(d, ell, q)
            asym: Optional[float]
            try:
                asym = moment_asymptote(d, q, ell)
            except HslError as e:
                logger.warning("Không có tiệm cận cho (d=%s, q=%s): %s", d, q, e)
                asym = None
            exact = mu / eigenspace_dim(d, ell) if q == 2 else None
            rows.append({
                "ell": ell,
                "q": q,
                "moment": value,
                "asymptote": asym,
                "ratio": value / asym if asym else None,
                "exact_rel_err": abs(value - exact) / exact if exact else None,
            })
    return rows


def identity_rows(d: int, ell_list: List[int]) -> List[Dict[str, Any]]:
    return [
        {
            "ell": ell,
            "reproducing_defect": reproducing_check(d, ell),
            "orthogonality_defect": orthogonality_defect(d, ell),
        }
        for ell in ell_list
    ]


class MomentsHandler:
    """Handler cho `moments`: bảng mô-men Gegenbauer và mô-men giải tích của X_ℓ."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.config = ctx.config

    async def handle(self) -> Dict[str, Any]:
        cfg = self.config
        try:
            spec = phi_spec(cfg.phi)
            assumption = check_assumption(spec)
            ell_key = ",".join(map(str, cfg.ell_list))

            rows = await self.ctx.cache_manager.get_or_compute(
                f"moments:{cfg.d}:{ell_key}:{cfg.q_max}",
                moment_rows, cfg.d, cfg.ell_list, cfg.q_max,
            )
            await self.ctx.writer.csv("sphere_moments.csv", rows)
            self.ctx.checkpoint()

            identities = await self.ctx.cache_manager.get_or_compute(
                f"identities:{cfg.d}:{ell_key}",
                identity_rows, cfg.d, cfg.ell_list,
            )
            await self.ctx.writer.csv("identities.csv", identities)
            self.ctx.checkpoint()

            analytic = []
            for ell in cfg.ell_list:
                m = await self.ctx.cache_manager.get_or_compute(
                    f"analytic:{cfg.d}:{ell}:{spec_key(spec)}",
                    analytic_moments, cfg.d, ell, spec,
                )
                analytic.append(m.to_json())
            await self.ctx.writer.jsonl("analytic_moments.jsonl", analytic)

            summary = {
                "d": cfg.d,
                "ell_list": cfg.ell_list,
                "phi": spec.to_json(),
                "assumption": assumption.to_json(),
                "max_exact_rel_err": max(
                    (r["exact_rel_err"] for r in rows if r["exact_rel_err"] is not None), default=None
                ),
                "max_reproducing_defect": max(r["reproducing_defect"] for r in identities),
            }
            await self.ctx.writer.json("summary.json", summary)
            return {"success": True, "message": "Đã tính bảng mô-men", "data": summary}
        except HslError as e:
            logger.error("Moments error: %s", e)
            return {"success": False, "message": f"Lỗi khi tính mô-men: {e}", "data": None}
