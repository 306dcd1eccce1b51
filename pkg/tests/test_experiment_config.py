#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import json

import pytest

from config.experiment import DEFAULT_TOLERANCES, ExperimentConfig, defaults_json, load_experiment_config
from numerics.errors import ConfigError


def _write(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
    return str(path)


def test_defaults():
    cfg = load_experiment_config(environ={})
    assert cfg.d == 2
    assert cfg.ell_list == [8, 16, 32, 64]
    assert cfg.phi == {"kind": "exponential", "params": {"t": 0.5}}
    assert cfg.tol("gaunt_rel") == DEFAULT_TOLERANCES["gaunt_rel"]
    assert json.loads(defaults_json())["seed"] == 12345


def test_hash_ignores_key_order_and_output_location(tmp_path):
    a = load_experiment_config(_write(tmp_path, {"seed": 7, "reps": 100}, "a.json"), environ={})
    b = load_experiment_config(_write(tmp_path, {"reps": 100, "seed": 7}, "b.json"), environ={})
    c = load_experiment_config(
        _write(tmp_path, {"reps": 100, "seed": 7, "out_dir": "elsewhere", "threads": 8}, "c.json"), environ={},
    )
    assert a.config_hash() == b.config_hash() == c.config_hash()
    assert len(a.config_hash()) == 64
    d = load_experiment_config(_write(tmp_path, {"reps": 101, "seed": 7}, "d.json"), environ={})
    assert d.config_hash() != a.config_hash()


def test_precedence_file_env_cli(tmp_path):
    path = _write(tmp_path, {"seed": 1, "reps": 10, "threads": 2})
    env = {"HSL_SEED": "2", "HSL_REPS": "20", "HSL_ELL": "4, 6"}
    cfg = load_experiment_config(path, {"seed": 3, "threads": None}, environ=env)
    assert cfg.seed == 3
    assert cfg.reps == 20
    assert cfg.threads == 2
    assert cfg.ell_list == [4, 6]


def test_tolerances_merge_with_defaults(tmp_path):
    cfg = load_experiment_config(_write(tmp_path, {"tolerances": {"w1_slope_tol": 0.2}}), environ={})
    assert cfg.tol("w1_slope_tol") == 0.2
    assert cfg.tol("moment_rel") == DEFAULT_TOLERANCES["moment_rel"]


def test_parse_error_reports_line_and_column(tmp_path):
    path = _write(tmp_path, '{\n  "seed": 1,\n  "reps": ,\n}')
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(path, environ={})
    assert exc.value.line == 3
    assert exc.value.column is not None
    assert str(exc.value).startswith(f"{path}:3:")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(str(tmp_path / "nope.json"), environ={})
    assert exc.value.path.endswith("nope.json")


def test_root_must_be_object(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment_config(_write(tmp_path, "[1, 2]"), environ={})


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(_write(tmp_path, {"sead": 1}), environ={})
    assert exc.value.field == "sead"


@pytest.mark.parametrize("payload, field", [
    ({"ell_list": [8, 15]}, "ell_list[1]"),
    ({"ell_list": [16, 8]}, "ell_list"),
    ({"ell_list": []}, "ell_list"),
    ({"d": 1}, "d"),
    ({"reps": 0}, "reps"),
    ({"reps": 1.5}, "reps"),
    ({"seed": -1}, "seed"),
    ({"seed": 2 ** 64}, "seed"),
    ({"backend": "gpu"}, "backend"),
    ({"phi": {"params": {}}}, "phi.kind"),
    ({"tolerances": {"gaunt_rel": -1}}, "tolerances.gaunt_rel"),
    ({"tolerances": {"speed": 1}}, "tolerances.speed"),
    ({"verify_profile": "slow"}, "verify_profile"),
    ({"write_xlsx": "yes"}, "write_xlsx"),
])
def test_field_validation(tmp_path, payload, field):
    path = _write(tmp_path, payload)
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(path, environ={})
    assert exc.value.field == field
    assert f"[{field}]" in str(exc.value)


def test_bad_env_value():
    with pytest.raises(ConfigError) as exc:
        load_experiment_config(environ={"HSL_THREADS": "many"})
    assert exc.value.field == "threads"


def test_reads_process_environment(monkeypatch):
    monkeypatch.setenv("HSL_OUT", "run-out")
    assert load_experiment_config().out_dir == "run-out"


def test_validate_directly():
    with pytest.raises(ConfigError):
        ExperimentConfig(oversample=0).validate()
