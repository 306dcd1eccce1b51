#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import asyncio
import io
import itertools
import json
import math

import openpyxl
import pytest

from cache.cache_manager import CacheManager
from config.experiment import ExperimentConfig
from database.db_manager import DatabaseManager
from handlers.artifacts import ArtifactWriter, RunContext, RunInterrupted
from handlers.diagram_handler import a_scan_records, covariance_cases, oracle_rows
from handlers.graph_integral_handler import band_nonincreasing, gaunt_rows, recovered_constants
from handlers.moments_handler import identity_rows, moment_rows
from handlers.rates_handler import build_fits
from handlers.report_xlsx import generate_report_xlsx
from handlers.verify_handler import CriterionResult, VerifyHandler, asymptotics, exact_second_moment
from numerics.diagram_engine import enumerate_A
from numerics.errors import ConvergenceError
from utils.utils import git_blob_digest


def test_oracle_rows_all_equal():
    rows = oracle_rows(3, 1, seed=0, n_max=3)
    assert rows
    assert all(r["equal"] for r in rows)
    assert {r["n"] for r in rows} == {1, 2, 3}


def test_covariance_cases_are_deterministic():
    a = covariance_cases(4, 3, seed=5)
    b = covariance_cases(4, 3, seed=5)
    assert a == b
    assert len(a) == 5 + 3
    for _, mat in a:
        assert all(mat[i][i] == 1 for i in range(4))
        assert all(mat[i][j] == mat[j][i] for i in range(4) for j in range(4))


def test_a_scan_records_cover_every_kappa():
    records = a_scan_records(2, [4], q_max=2, mc_samples=10_000, seed=1)
    expected = sum(
        1 for q in itertools.combinations_with_replacement(range(3), 4) for _ in enumerate_A(q)
    )
    assert len(records) == expected
    assert all(r["method"] == "spectral" for r in records)
    assert all(r["bound"] > 0 for r in records)


def test_gaunt_constants_recovered(golden):
    pinned = golden("gaunt_constants.json")
    constants = recovered_constants(2, gaunt_rows(2, (4, 8), max_exponent=2))
    assert set(constants) == {"A1", "B", "C"}
    for family, c in constants.items():
        assert c["measured"] == pytest.approx(pinned[family], rel=1e-8)
        assert c["spread"] < 1e-8


def test_band_nonincreasing():
    assert band_nonincreasing([1.0, 1.05, 0.9], 1.1)
    assert not band_nonincreasing([1.0, 1.2], 1.1)
    assert band_nonincreasing([], 1.1)


def test_moment_rows_exact_second_moment():
    rows = moment_rows(2, [4, 8], q_max=4)
    assert len(rows) == 6
    for r in rows:
        if r["q"] == 2:
            assert r["exact_rel_err"] < 1e-10
        else:
            assert r["exact_rel_err"] is None
    assert all(r["reproducing_defect"] < 1e-10 for r in identity_rows(2, [4, 8]))


def test_build_fits_skips_short_series():
    rows = [
        {"ell": ell, "w1": 0.5 / math.sqrt(ell), "w1_err": 0.01, "tv_proxy": 0.2 / math.sqrt(ell),
         "w1_sigma": None, "var_sigma": None, "var_sigma_err": None}
        for ell in (4, 8, 16, 32)
    ]
    fits = build_fits(2, rows)
    assert fits["w1_xtilde"]["slope"] == pytest.approx(-0.5, abs=1e-12)
    assert fits["tv_xtilde"]["slope"] == pytest.approx(-0.5, abs=1e-12)
    assert fits["var_sigma"]["slope"] is None


def test_pure_analytic_criteria():
    assert exact_second_moment((2, 3), range(0, 21, 2), 1e-10).passed
    c3 = asymptotics(200, 0.10, 0.10)
    assert c3.id == "C3"
    assert c3.passed
    assert 0.5 < c3.measured["d2_q4_ratio"] < 1.0


def test_report_xlsx_sheets():
    content = generate_report_xlsx("HSL test", {
        "rates": [{"ell": 8, "w1": 0.1, "fit": {"slope": -0.5}}],
        "empty": [],
    })
    assert content[:2] == b"PK"
    wb = openpyxl.load_workbook(io.BytesIO(content))
    assert wb.sheetnames == ["rates", "empty"]
    ws = wb["rates"]
    assert [c.value for c in ws[2]] == ["ell", "w1", "fit"]
    assert ws.cell(row=3, column=3).value == '{"slope":-0.5}'
    assert ws.freeze_panes == "A3"
    assert ws.cell(row=3, column=2).number_format == "0.000000E+00"


def test_report_xlsx_marks_failed_rows():
    content = generate_report_xlsx("HSL verify", {
        "criteria": [
            {"id": "C1", "status": "pass", "value": 1.0},
            {"id": "C2", "status": "fail", "value": float("nan")},
            {"id": "C3", "equal": False},
        ],
    })
    ws = openpyxl.load_workbook(io.BytesIO(content))["criteria"]
    fills = [ws.cell(row=r, column=1).fill.start_color.rgb for r in (3, 4, 5)]
    assert fills[0] != "00F4CCCC"
    assert fills[1:] == ["00F4CCCC", "00F4CCCC"]
    assert ws.cell(row=4, column=3).value == "nan"


# ==================== Artifact writer & verify ====================

def _run_with_context(tmp_path, body, **config):
    out = str(tmp_path / "out")
    cfg = ExperimentConfig(out_dir=out, **config)

    async def scenario():
        db = DatabaseManager(out)
        cache = CacheManager()
        await db.connect()
        await cache.connect()
        try:
            exp_id = await db.start_experiment("test", cfg.config_hash(), cfg.seed, cfg.to_json())
            writer = ArtifactWriter(db, exp_id, cfg.config_hash(), out, "test")
            ctx = RunContext(config=cfg, cache_manager=cache, writer=writer)
            result = await body(ctx)
            records = await db.get_result_records(exp_id)
            return result, writer, records
        finally:
            await db.close()
            await cache.close()

    return asyncio.run(scenario())


def test_artifact_writer_registers_digests(tmp_path):
    async def body(ctx):
        await ctx.writer.csv("a.csv", [{"x": 1}])
        await ctx.writer.json("b.json", {"k": [1, 2]})
        await ctx.writer.csv("a.csv", [{"x": 2}])
        return None

    _, writer, records = _run_with_context(tmp_path, body)
    assert len(writer.written) == 2
    assert len(records) == 2
    by_path = {r["payload_path"]: r["digest"] for r in records}
    with open(writer.path("a.csv"), "rb") as fh:
        assert by_path[writer.path("a.csv")] == git_blob_digest(fh.read())
    assert writer.tables["a"] == [{"x": 2}]


def test_checkpoint_raises_after_stop(tmp_path):
    async def body(ctx):
        ctx.checkpoint()
        ctx.stop_event.set()
        with pytest.raises(RunInterrupted):
            ctx.checkpoint()

    _run_with_context(tmp_path, body)


def _stub(name, status="pass"):
    async def step():
        if status == "error":
            raise ConvergenceError("không hội tụ")
        if status == "crash":
            raise RuntimeError("chia cho 0")
        return CriterionResult(name.upper(), "stub", status)
    step.__name__ = name
    return step


def test_verify_writes_criteria(tmp_path):
    async def body(ctx):
        handler = VerifyHandler(ctx)
        for i in range(4, 13):
            name = f"c{i}"
            setattr(handler, name, _stub(name, "error" if i == 9 else "pass"))
        return await handler.handle()

    result, writer, records = _run_with_context(tmp_path, body, verify_profile="quick")
    assert result["success"] is False
    summary = result["data"]
    assert summary["complete"] is True
    assert summary["failed"] == ["C9"]
    assert [c["status"] for c in summary["criteria"][:3]] == ["pass", "pass", "pass"]
    assert summary["criteria"][8]["status"] == "error"

    with open(writer.path("criteria.csv"), encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\r\n")
    assert lines[0].startswith("id,title,status,runtime_s")
    assert len([line for line in lines if line]) == 13
    with open(writer.path("verify_summary.json"), encoding="utf-8") as fh:
        assert json.load(fh)["failed"] == ["C9"]
    assert len(records) == 2


def test_verify_continues_after_unexpected_error(tmp_path):
    async def body(ctx):
        handler = VerifyHandler(ctx)
        for i in range(1, 13):
            name = f"c{i}"
            setattr(handler, name, _stub(name, "crash" if i == 5 else "pass"))
        return await handler.handle()

    result, writer, _ = _run_with_context(tmp_path, body, verify_profile="quick")
    summary = result["data"]
    assert summary["complete"] is True
    assert summary["failed"] == ["C5"]
    assert [c["id"] for c in summary["criteria"]] == [f"C{i}" for i in range(1, 13)]
    crashed = summary["criteria"][4]
    assert crashed["status"] == "error"
    assert crashed["message"] == "RuntimeError: chia cho 0"
    assert all(c["status"] == "pass" for i, c in enumerate(summary["criteria"]) if i != 4)
    with open(writer.path("verify_summary.json"), encoding="utf-8") as fh:
        assert json.load(fh)["failed"] == ["C5"]


def test_verify_stop_request_is_not_swallowed(tmp_path):
    async def body(ctx):
        handler = VerifyHandler(ctx)

        async def c1():
            ctx.stop_event.set()
            ctx.checkpoint()

        handler.c1 = c1
        with pytest.raises(RunInterrupted):
            await handler.handle()
        return handler.results

    results, writer, _ = _run_with_context(tmp_path, body, verify_profile="quick")
    assert results == []
    with open(writer.path("verify_summary.json"), encoding="utf-8") as fh:
        assert json.load(fh)["complete"] is False
