#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Handler cho subcommand `graph-integral`.

- Đẳng thức Gaunt (họ A1, B, C) trên lưới ℓ × số mũ: tỉ số vế trái/vế phải phải
  là hằng số không phụ thuộc ℓ và số mũ.
- Quét ℓ³·|𝔍_{q,κ}(ℓ)| trên 𝒞 (κ liên thông đủ mạnh), kèm phân bố R.

File ghi ra (`<out>/graph-integral/`): `gaunt.csv`, `gaunt_constants.json`,
`prop_I.csv`, `summary.json`.
"""

import itertools
import logging
import statistics
from typing import Any, Dict, List, Sequence

from handlers.artifacts import RunContext
from numerics.errors import HslError
from numerics.graph_integrals import (
    GauntCase,
    gaunt_constants,
    gaunt_identity_check,
    prop_I_scan,
)

logger = logging.getLogger(__name__)

GAUNT_ELLS = (4, 8, 16, 32)
GAUNT_MAX_EXPONENT = 4


def gaunt_cases(max_exponent: int = GAUNT_MAX_EXPONENT) -> List[GauntCase]:
    r2 = range(2, max_exponent + 1)
    cases = [GauntCase("A1", (p, q)) for p, q in itertools.product(r2, r2)]
    cases += [GauntCase("B", (a, b, c)) for a, b, c in itertools.product(r2, r2, range(1, max_exponent + 1))]
    cases += [GauntCase("C", (a, b, c)) for a, b, c in itertools.product(r2, r2, range(0, max_exponent + 1))]
    return cases


def gaunt_rows(d: int, ell_list: Sequence[int], max_exponent: int = GAUNT_MAX_EXPONENT) -> List[Dict[str, Any]]:
    rows = []
    for ell in ell_list:
        for case in gaunt_cases(max_exponent):
            rows.append(gaunt_identity_check(d, ell, case).to_json())
    return rows


def recovered_constants(d: int, rows: List[Dict[str, Any]]) -> Dict[str, Dict[str, Any]]:
    """Hằng số đo được của từng họ: trung vị tỉ số và độ lệch tương đối lớn nhất."""
    expected = gaunt_constants(d)
    out = {}
    for family in ("A1", "B", "C"):
        ratios = [r["ratio"] for r in rows if r["family"] == family and r["ratio"] == r["ratio"]]
        if not ratios:
            continue
        center = statistics.median(ratios)
        out[family] = {
            "measured": center,
            "expected": expected[family],
            "spread": max(abs(x - center) for x in ratios) / abs(center),
            "rel_dev": abs(center - expected[family]) / expected[family],
            "cases": len(ratios),
        }
    return out


def band_nonincreasing(values: Sequence[float], band: float) -> bool:
    """Dãy không tăng sai khác tối đa hệ số `band`: v_j ≤ band·v_i với mọi i < j."""
    return all(values[j] <= band * values[i] for i in range(len(values)) for j in range(i + 1, len(values)))


class GraphIntegralHandler:
    """Handler cho `graph-integral`: đẳng thức Gaunt và quét 𝔍."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.config = ctx.config

    async def handle(self) -> Dict[str, Any]:
        cfg = self.config
        try:
            rows = await self.ctx.cache_manager.get_or_compute(
                f"gaunt:{cfg.d}:{GAUNT_MAX_EXPONENT}",
                gaunt_rows, cfg.d, GAUNT_ELLS,
            )
            await self.ctx.writer.csv("gaunt.csv", rows)
            constants = recovered_constants(cfg.d, rows)
            await self.ctx.writer.json("gaunt_constants.json", constants)
            self.ctx.checkpoint()

            ell_key = ",".join(map(str, cfg.ell_list))
            scan = await self.ctx.cache_manager.get_or_compute(
                f"propI:{cfg.d}:{ell_key}:{cfg.q_max}:{cfg.mc_samples}:{cfg.seed}",
                prop_I_scan, cfg.ell_list, cfg.q_max, cfg.mc_samples, cfg.seed, cfg.d,
            )
            await self.ctx.writer.csv(
                "prop_I.csv", scan.rows,
                ["ell", "q1", "q2", "q3", "q4", "kappa_id", "R", "N", "value", "abs_err", "method",
                 "scaled", "mc_ok"],
            )
            maxima = [scan.max_per_ell[ell] for ell in cfg.ell_list]
            summary = {
                "gaunt": constants,
                "prop_I_max_per_ell": {str(k): v for k, v in scan.max_per_ell.items()},
                "prop_I_band_ok": band_nonincreasing(maxima, cfg.tol("prop_i_band")),
                "prop_I_mc_cells": sum(r["method"] == "mc" for r in scan.rows),
                "prop_I_mc_bad": sum(not r["mc_ok"] for r in scan.rows),
                "R_histogram": {str(k): v for k, v in scan.r_histogram.items()},
            }
            await self.ctx.writer.json("summary.json", summary)
            return {"success": True, "message": "Đã tính tích phân đồ thị", "data": summary}
        except HslError as e:
            logger.error("Graph-integral error: %s", e)
            return {"success": False, "message": f"Lỗi khi tính tích phân đồ thị: {e}", "data": None}
