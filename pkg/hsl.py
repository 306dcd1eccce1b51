#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
HSL - entrypoint dòng lệnh cho bộ công cụ kiểm chứng số TV-CLT của random
hyperspherical harmonics.

Subcommand:
- moments         bảng ∫G^q so với tiệm cận, đẳng thức tái sinh
- diagram         diagram formula vs oracle Isserlis, quét 𝒜 với cận cây khung
- graph-integral  đẳng thức Gaunt, quét ℓ³|𝔍|
- simulate        batch realization, X_ℓ, X̃_ℓ, σ_ℓ
- rates           chuỗi W1 / proxy TV theo ℓ và fit log-log
- verify          bộ tiêu chí C1..C12, exit ≠ 0 khi có tiêu chí không đạt
- config          in config hiệu lực (`--print-defaults`: config mặc định)
- ledger          liệt kê experiment trong ledger, `--check ID` so digest với đĩa

Vòng đời một lần chạy:
- Lock thư mục output qua DatabaseManager để 2 lần chạy không ghi đè nhau
- Ghi experiment vào ledger, mỗi file kết quả là một ResultRecord
- SIGINT/SIGTERM: dừng ở checkpoint kế tiếp, giữ file đã ghi, exit 130

Exit code: 0 thành công, 1 thất bại, 2 lỗi config, 130 bị dừng.
"""

import argparse
import asyncio
import logging
import os
import signal
import sys
from typing import Any, Dict, List, Optional

from cache.cache_manager import CacheManager
from config.config import Config
from config.experiment import ExperimentConfig, defaults_json, load_experiment_config
from database.db_manager import DatabaseManager
from handlers.artifacts import ArtifactWriter, RunContext, RunInterrupted
from handlers.diagram_handler import DiagramHandler
from handlers.graph_integral_handler import GraphIntegralHandler
from handlers.moments_handler import MomentsHandler
from handlers.rates_handler import RatesHandler
from handlers.report_xlsx import generate_report_xlsx
from handlers.simulate_handler import SimulateHandler
from handlers.verify_handler import VerifyHandler
from numerics.errors import ConfigError
from utils.logging_config import attach_run_log, detach_run_log, setup_logging
from utils.utils import canonical_json, parse_int_list

setup_logging()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130

HANDLERS = {
    "moments": MomentsHandler,
    "diagram": DiagramHandler,
    "graph-integral": GraphIntegralHandler,
    "simulate": SimulateHandler,
    "rates": RatesHandler,
    "verify": VerifyHandler,
}


# ==================== Argparse ====================

def _ell_arg(value: str) -> List[int]:
    try:
        return parse_int_list(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="file config JSON")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--threads", type=int, help="số worker cho shard replicate")
    common.add_argument("--out", metavar="DIR", help="thư mục output")
    common.add_argument("--ell", type=_ell_arg, metavar="8,16,32", help="danh sách ℓ chẵn")
    common.add_argument("--reps", type=int, help="số replicate mỗi ℓ")
    common.add_argument("--xlsx", action="store_true", default=None, help="ghi thêm workbook report.xlsx")
    common.add_argument("--log-level", help="ghi đè HSL_LOG_LEVEL")

    parser = argparse.ArgumentParser(
        prog="hsl",
        description="Kiểm chứng số TV-CLT cho phiếm hàm phi tuyến của hyperspherical harmonics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("--quick", action="store_true", help="profile rút gọn (chạy thử)")
    p = sub.add_parser("config", parents=[common])
    p.add_argument("--print-defaults", action="store_true", help="in config mặc định rồi thoát")
    p = sub.add_parser("ledger", parents=[common])
    p.add_argument("--limit", type=int, default=20, help="số experiment gần nhất cần liệt kê")
    p.add_argument("--check", type=int, metavar="ID", help="so digest các file của experiment ID với đĩa")
    return parser


def cli_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "out_dir": args.out,
        "ell_list": args.ell,
        "reps": args.reps,
        "write_xlsx": args.xlsx,
    }
    if getattr(args, "quick", False):
        overrides["verify_profile"] = "quick"
    return overrides


# ==================== Runner ====================

class HslRunner:
    def __init__(self, subcommand: str, experiment: ExperimentConfig) -> None:
        self.subcommand = subcommand
        self.experiment = experiment
        self.config = Config()
        self.db_manager = DatabaseManager(experiment.out_dir)
        self.cache_manager = CacheManager()
        self.stop_event = asyncio.Event()
        self.experiment_id: Optional[int] = None
        self._locked = False

    async def run(self) -> int:
        os.makedirs(self.experiment.out_dir, exist_ok=True)
        await self.db_manager.connect()
        await self.cache_manager.connect()

        self._locked = await self.db_manager.acquire_output_lock()
        if not self._locked:
            logger.error(
                "Thư mục output %s đang được một lần chạy khác dùng. Thoát.", self.experiment.out_dir
            )
            await self._cleanup()
            return EXIT_FAILED

        cfg = self.experiment
        self.experiment_id = await self.db_manager.start_experiment(
            self.subcommand, cfg.config_hash(), cfg.seed, cfg.to_json()
        )
        writer = ArtifactWriter(
            self.db_manager, self.experiment_id, cfg.config_hash(), cfg.out_dir, self.subcommand
        )
        ctx = RunContext(config=cfg, cache_manager=self.cache_manager, writer=writer, stop_event=self.stop_event)
        run_log = attach_run_log(
            os.path.join(writer.directory, "run.log"), f"{self.subcommand}#{self.experiment_id}"
        )
        logger.info(
            "Bắt đầu %s (experiment #%s, config %s, seed %s)",
            self.subcommand, self.experiment_id, cfg.config_hash()[:12], cfg.seed,
        )

        status, exit_code, summary = "failed", EXIT_FAILED, None
        try:
            result = await HANDLERS[self.subcommand](ctx).handle()
            summary = {"message": result["message"], "files": len(writer.written)}
            if result["success"]:
                status, exit_code = "ok", EXIT_OK
                logger.info("%s", result["message"])
            else:
                logger.error("%s", result["message"])
            if cfg.write_xlsx and writer.tables:
                content = await asyncio.to_thread(generate_report_xlsx, f"HSL {self.subcommand}", writer.tables)
                await writer.xlsx("report.xlsx", content)
        except RunInterrupted:
            logger.warning("Đã dừng %s; giữ %s file đã ghi.", self.subcommand, len(writer.written))
            status, exit_code = "interrupted", EXIT_INTERRUPTED
            summary = {"message": "interrupted", "files": len(writer.written)}
        except Exception:
            logger.exception("Lần chạy %s lỗi không mong đợi.", self.subcommand)
            raise
        finally:
            await self.db_manager.finish_experiment(self.experiment_id, status, summary)
            logger.info("Cache: %s", self.cache_manager.stats())
            detach_run_log(run_log)
            await self._cleanup()
        return exit_code

    async def _cleanup(self) -> None:
        if self._locked:
            await self.db_manager.release_output_lock()
            self._locked = False
        await self.db_manager.close()
        await self.cache_manager.close()
        logger.debug("Đã đóng ledger và cache.")


async def show_ledger(out_dir: str, limit: int, check_id: Optional[int]) -> int:
    """In experiment gần nhất (JSON lines); `check_id` thì kiểm digest, exit 1 nếu lệch."""
    if not os.path.isdir(out_dir):
        logger.error("Không có thư mục output %s.", out_dir)
        return EXIT_FAILED
    db_manager = DatabaseManager(out_dir)
    await db_manager.connect()
    try:
        if check_id is None:
            for row in await db_manager.list_experiments(limit):
                print(canonical_json(row))
            return EXIT_OK
        if await db_manager.get_experiment(check_id) is None:
            logger.error("Không có experiment #%s trong ledger.", check_id)
            return EXIT_FAILED
        problems = await db_manager.check_records(check_id)
        for p in problems:
            print(canonical_json(p))
        return EXIT_FAILED if problems else EXIT_OK
    finally:
        await db_manager.close()


async def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        setup_logging(args.log_level)

    if args.command == "config" and args.print_defaults:
        print(defaults_json())
        return EXIT_OK

    try:
        Config()
        experiment = load_experiment_config(args.config, cli_overrides(args))
    except ConfigError as e:
        logger.error("Lỗi config: %s", e)
        return EXIT_CONFIG
    except ValueError as e:
        logger.error("Lỗi cấu hình môi trường: %s", e)
        return EXIT_CONFIG

    if args.command == "config":
        print(canonical_json(experiment.to_json()))
        print(f"config_hash={experiment.config_hash()}")
        return EXIT_OK

    if args.command == "ledger":
        return await show_ledger(experiment.out_dir, args.limit, args.check)

    runner = HslRunner(args.command, experiment)
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, runner.stop_event.set)
        except (NotImplementedError, RuntimeError):
            # Windows không hỗ trợ add_signal_handler; Ctrl+C rơi về KeyboardInterrupt
            pass

    return await runner.run()


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
