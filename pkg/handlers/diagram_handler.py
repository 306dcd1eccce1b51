#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Handler cho subcommand `diagram`.

Hai phép đo:
- Đối chiếu công thức diagram với oracle Isserlis (số hữu tỉ chính xác) cho mọi
  bộ q với n ≤ 4, q_i ≤ `diagram_q_max`, trên các ma trận tương quan đều
  {0, ±1/2, ±1} và `diagram_cov_samples` ma trận rút tất định từ cùng tập.
- Quét 𝒜 với n = 4: ∫∏G^{2k_ij} so với cận cây khung C_d(N_κ)/ℓ^{(d−1)(n−N_κ)}.

File ghi ra (`<out>/diagram/`): `oracle_check.csv`, `A_scan.jsonl`, `summary.json`.
"""

import itertools
import logging
from fractions import Fraction
from typing import Any, Dict, List, Sequence, Tuple

from handlers.artifacts import RunContext
from numerics.diagram_engine import (
    DiagramIndex,
    enumerate_A,
    extract_graph,
    joint_hermite_moment,
    spanning_tree_bound,
    wick_oracle,
)
from numerics.errors import HslError
from numerics.graph_integrals import four_point_integral, kappa_id
from utils.rng import stream

logger = logging.getLogger(__name__)

_COV_VALUES = (Fraction(0), Fraction(1, 2), Fraction(-1, 2), Fraction(1), Fraction(-1))
_COV_STREAM = 0xC0F
# Số sai số chuẩn cho phép khi giá trị đến từ Monte Carlo
BOUND_MC_SIGMAS = 3.0


def _uniform_cov(n: int, rho: Fraction) -> List[List[Fraction]]:
    return [[Fraction(1) if i == j else rho for j in range(n)] for i in range(n)]


def covariance_cases(n: int, samples: int, seed: int) -> List[Tuple[str, List[List[Fraction]]]]:
    """Ma trận đều ρ ∈ {0, ±1/2, ±1} rồi `samples` ma trận rút tất định từ cùng tập."""
    cases = [(f"all={rho}", _uniform_cov(n, rho)) for rho in _COV_VALUES]
    for s in range(samples):
        rng = stream(seed, _COV_STREAM, n, s)
        mat = _uniform_cov(n, Fraction(0))
        for i, j in itertools.combinations(range(n), 2):
            mat[i][j] = mat[j][i] = _COV_VALUES[int(rng.integers(len(_COV_VALUES)))]
        cases.append((f"draw{s}", mat))
    return cases


def oracle_rows(q_max: int, cov_samples: int, seed: int, n_max: int = 4) -> List[Dict[str, Any]]:
    """Bảng diagram ↔ Isserlis; bộ q lấy không giảm (hoán vị chỉ đổi nhãn tương quan)."""
    rows = []
    for n in range(1, n_max + 1):
        covs = covariance_cases(n, cov_samples, seed)
        for q in itertools.combinations_with_replacement(range(q_max + 1), n):
            for cov_id, cov in covs:
                diagram = joint_hermite_moment(q, cov)
                oracle = wick_oracle(q, cov)
                rows.append({
                    "n": n,
                    "q": list(q),
                    "cov": cov_id,
                    "diagram": str(diagram),
                    "oracle": str(oracle),
                    "equal": diagram == oracle,
                })
    logger.info("Đối chiếu diagram/Isserlis: %s trường hợp", len(rows))
    return rows


def doubled(kappa: DiagramIndex) -> DiagramIndex:
    """κ với mọi số mũ nhân đôi (tích phân trong cận cây khung dùng G^{2k_ij})."""
    return DiagramIndex.from_upper(kappa.n, {(i, j): 2 * k for i, j, k in kappa.upper()})


def a_scan_records(
    d: int,
    ell_list: Sequence[int],
    q_max: int,
    mc_samples: int,
    seed: int,
) -> List[Dict[str, Any]]:
    """∫∏G^{2k_ij} và cận cây khung cho mọi κ ∈ 𝒜_q, n = 4, 0 ≤ q_i ≤ q_max."""
    kappas = []
    for q in itertools.combinations_with_replacement(range(q_max + 1), 4):
        kappas.extend((q, kappa) for kappa in enumerate_A(q))
    records = []
    for ell in ell_list:
        pair_cache: Dict = {}
        for q, kappa in kappas:
            graph = extract_graph(kappa)
            est = four_point_integral(
                d, ell, doubled(kappa), extra=(), mc_samples=mc_samples, seed=seed, pair_cache=pair_cache,
            )
            bound = spanning_tree_bound(d, ell, kappa)
            slack = BOUND_MC_SIGMAS * est.abs_err
            records.append({
                "ell": ell,
                "q": list(q),
                "kappa": kappa.to_json(),
                "kappa_id": kappa_id(kappa),
                "N": graph.n_components,
                "R": graph.R,
                "value": est.value,
                "abs_err": est.abs_err,
                "method": est.method,
                "bound": bound,
                "violation": abs(est.value) > bound + slack,
            })
        logger.info("Quét 𝒜 tại ℓ=%s: %s ma trận κ", ell, len(kappas))
    return records


class DiagramHandler:
    """Handler cho `diagram`: oracle Isserlis và quét 𝒜 với cận cây khung."""

    def __init__(self, ctx: RunContext):
        self.ctx = ctx
        self.config = ctx.config

    async def handle(self) -> Dict[str, Any]:
        cfg = self.config
        try:
            checks = await self.ctx.cache_manager.get_or_compute(
                f"oracle:{cfg.diagram_q_max}:{cfg.diagram_cov_samples}:{cfg.seed}",
                oracle_rows, cfg.diagram_q_max, cfg.diagram_cov_samples, cfg.seed,
            )
            await self.ctx.writer.csv("oracle_check.csv", checks)
            self.ctx.checkpoint()

            records: List[Dict[str, Any]] = []
            for ell in cfg.ell_list:
                records.extend(await self.ctx.cache_manager.get_or_compute(
                    f"ascan:{cfg.d}:{ell}:{cfg.diagram_q_max}:{cfg.mc_samples}:{cfg.seed}",
                    a_scan_records, cfg.d, [ell], cfg.diagram_q_max, cfg.mc_samples, cfg.seed,
                ))
                self.ctx.checkpoint()
            await self.ctx.writer.jsonl("A_scan.jsonl", records)

            summary = {
                "oracle_cases": len(checks),
                "oracle_mismatches": sum(not r["equal"] for r in checks),
                "scan_records": len(records),
                "bound_violations": sum(r["violation"] for r in records),
                "mc_records": sum(r["method"] == "mc" for r in records),
            }
            await self.ctx.writer.json("summary.json", summary)
            return {"success": True, "message": "Đã quét diagram", "data": summary}
        except HslError as e:
            logger.error("Diagram error: %s", e)
            return {"success": False, "message": f"Lỗi khi quét diagram: {e}", "data": None}
