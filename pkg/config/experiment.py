#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Cấu hình thí nghiệm (`ExperimentConfig`).

Thứ tự ưu tiên: default nhúng sẵn < file JSON (`--config`) < biến môi trường
`HSL_*` < cờ CLI. Lỗi parse báo `path:dòng:cột`; lỗi giá trị báo tên trường
dạng chấm (vd `phi.params.t`).

Config hash = SHA-256 của JSON chuẩn hoá (sort key, separator gọn), bỏ qua
`out_dir` và `threads` vì hai trường này không ảnh hưởng kết quả số.
"""

import copy
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional

from numerics.errors import ConfigError
from utils.utils import canonical_json, parse_int_list, sha256_hex

logger = logging.getLogger(__name__)

_BACKENDS = ("auto", "harmonic", "cholesky")
_PROFILES = ("full", "quick")
_HASH_EXCLUDED = ("out_dir", "threads")
MAX_SEED = 2 ** 64 - 1

DEFAULT_TOLERANCES: Dict[str, float] = {
    "moment_rel": 1e-10,
    "reproducing": 1e-10,
    "asymptote_rel": 0.10,
    "asymptote_log_rel": 0.15,
    "gaunt_rel": 1e-6,
    "prop_i_band": 2.0,
    "mc_rel_se": 0.10,
    "mc_sigmas": 3.0,
    "variance_asymptote_rel": 0.10,
    "sigma_mean_abs": 1e-9,
    "eta_ratio": 3.0,
    "var_sigma_slope_tol": 0.3,
    "w1_slope_tol": 0.15,
}


@dataclass
class ExperimentConfig:
    d: int = 2
    ell_list: List[int] = field(default_factory=lambda: [8, 16, 32, 64])
    phi: Dict[str, Any] = field(default_factory=lambda: {"kind": "exponential", "params": {"t": 0.5}})
    backend: str = "auto"
    oversample: int = 1
    reps: int = 2000
    mc_samples: int = 100_000
    seed: int = 12345
    out_dir: str = "results"
    threads: int = 1
    q_max: int = 4
    diagram_q_max: int = 5
    diagram_cov_samples: int = 6
    write_xlsx: bool = False
    verify_profile: str = "full"
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    # ==================== Validation ====================

    def validate(self, path: Optional[str] = None) -> "ExperimentConfig":
        """Kiểm tra mọi trường; raise ConfigError kèm tên trường."""

        def fail(name: str, message: str):
            raise ConfigError(message, path=path, field=name)

        for name in ("d", "oversample", "reps", "mc_samples", "threads", "q_max",
                     "diagram_q_max", "diagram_cov_samples", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                fail(name, f"phải là số nguyên, nhận được {value!r}.")
        if self.d < 2:
            fail("d", f"phải ≥ 2, nhận được {self.d}.")
        if not isinstance(self.ell_list, list) or not self.ell_list:
            fail("ell_list", "phải là danh sách ℓ khác rỗng.")
        for i, ell in enumerate(self.ell_list):
            if isinstance(ell, bool) or not isinstance(ell, int) or ell < 2 or ell % 2:
                fail(f"ell_list[{i}]", f"ℓ phải là số nguyên chẵn ≥ 2, nhận được {ell!r}.")
        if any(b <= a for a, b in zip(self.ell_list, self.ell_list[1:])):
            fail("ell_list", f"phải tăng ngặt, nhận được {self.ell_list}.")
        if not isinstance(self.phi, dict) or not isinstance(self.phi.get("kind"), str):
            fail("phi.kind", "φ phải là object có trường `kind`.")
        if "params" in self.phi and not isinstance(self.phi["params"], dict):
            fail("phi.params", "phải là object.")
        if self.backend not in _BACKENDS:
            fail("backend", f"phải thuộc {_BACKENDS}, nhận được {self.backend!r}.")
        for name in ("oversample", "reps", "mc_samples", "threads", "diagram_cov_samples"):
            if getattr(self, name) < 1:
                fail(name, f"phải ≥ 1, nhận được {getattr(self, name)}.")
        if self.q_max < 2:
            fail("q_max", f"phải ≥ 2, nhận được {self.q_max}.")
        if self.diagram_q_max < 1:
            fail("diagram_q_max", f"phải ≥ 1, nhận được {self.diagram_q_max}.")
        if not 0 <= self.seed <= MAX_SEED:
            fail("seed", f"phải nằm trong [0, 2^64), nhận được {self.seed}.")
        if not isinstance(self.out_dir, str) or not self.out_dir:
            fail("out_dir", "phải là đường dẫn khác rỗng.")
        if not isinstance(self.write_xlsx, bool):
            fail("write_xlsx", f"phải là true/false, nhận được {self.write_xlsx!r}.")
        if self.verify_profile not in _PROFILES:
            fail("verify_profile", f"phải thuộc {_PROFILES}, nhận được {self.verify_profile!r}.")
        if not isinstance(self.tolerances, dict):
            fail("tolerances", "phải là object.")
        for key, value in self.tolerances.items():
            if key not in DEFAULT_TOLERANCES:
                fail(f"tolerances.{key}", f"không có dung sai tên {key!r}.")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                fail(f"tolerances.{key}", f"phải là số dương, nhận được {value!r}.")
        return self

    # ==================== Hash / dump ====================

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)

    def hashed_payload(self) -> Dict[str, Any]:
        payload = self.to_json()
        for key in _HASH_EXCLUDED:
            payload.pop(key, None)
        return payload

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.hashed_payload()))

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))


def defaults_json() -> str:
    """JSON của config mặc định, dùng cho `config --print-defaults`."""
    return json.dumps(ExperimentConfig().to_json(), indent=2, ensure_ascii=False)


# ==================== Loader ====================

def _merge(base: Dict[str, Any], overrides: Mapping[str, Any], path: Optional[str]) -> Dict[str, Any]:
    known = {f.name for f in fields(ExperimentConfig)}
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"trường không xác định {key!r}.", path=path, field=key)
        if key == "tolerances" and isinstance(value, dict):
            merged["tolerances"] = {**merged.get("tolerances", {}), **value}
        else:
            merged[key] = value
    return merged


def _read_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"không đọc được file: {e.strerror or e}", path=path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, path=path, line=e.lineno, column=e.colno)
    if not isinstance(data, dict):
        raise ConfigError("nội dung gốc phải là JSON object.", path=path, line=1, column=1)
    return data


def _env_overrides(environ: Mapping[str, str]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    int_fields = {"HSL_SEED": "seed", "HSL_THREADS": "threads", "HSL_REPS": "reps"}
    for env_name, key in int_fields.items():
        raw = environ.get(env_name, "").strip()
        if raw:
            try:
                overrides[key] = int(raw)
            except ValueError:
                raise ConfigError(f"{env_name} phải là số nguyên, nhận được {raw!r}.", field=key)
    raw_out = environ.get("HSL_OUT", "").strip()
    if raw_out:
        overrides["out_dir"] = raw_out
    raw_ell = environ.get("HSL_ELL", "").strip()
    if raw_ell:
        try:
            overrides["ell_list"] = parse_int_list(raw_ell)
        except ValueError as e:
            raise ConfigError(str(e), field="ell_list")
    return overrides


def load_experiment_config(
    path: Optional[str] = None,
    cli_overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Dựng `ExperimentConfig` theo thứ tự ưu tiên default < file < env < CLI."""
    environ = os.environ if environ is None else environ
    merged = ExperimentConfig().to_json()
    if path:
        merged = _merge(merged, _read_file(path), path)
        logger.info("Đã đọc config thí nghiệm từ %s", path)
    merged = _merge(merged, _env_overrides(environ), None)
    cli = {k: v for k, v in (cli_overrides or {}).items() if v is not None}
    merged = _merge(merged, cli, None)
    config = ExperimentConfig(**merged).validate(path)
    logger.debug("Config hash: %s", config.config_hash())
    return config
