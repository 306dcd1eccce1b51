#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import asyncio
import json
import logging
import math

import numpy as np
import pytest

from utils.logging_config import attach_run_log, detach_run_log
from utils.rng import derive_seed, shard_sizes, stream, uniform_sphere
from utils.running_stats import RunningStats
from utils.utils import (
    canonical_json,
    file_digest,
    git_blob_digest,
    parse_int_list,
    to_jsonable,
    write_csv,
    write_jsonl,
)


def test_git_blob_digest_matches_git():
    assert git_blob_digest(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert git_blob_digest(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_file_digest(tmp_path):
    path = tmp_path / "x.txt"
    path.write_bytes(b"hello\n")
    assert file_digest(str(path)) == git_blob_digest(b"hello\n")


def test_canonical_json():
    assert canonical_json({"b": 1, "a": [1.5, float("nan")]}) == '{"a":[1.5,null],"b":1}'
    assert canonical_json({"ℓ": np.int64(3)}) == '{"ℓ":3}'
    assert to_jsonable((np.float64(2.0), np.bool_(True), float("inf"))) == [2.0, True, None]


def test_write_csv_format(tmp_path):
    path = tmp_path / "out" / "rows.csv"
    write_csv(str(path), [
        {"ell": 8, "value": 0.1, "note": "a,b"},
        {"ell": 16, "value": None, "extra": {"k": 1}},
    ])
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 3
    lines = raw.decode("utf-8").split("\r\n")
    assert lines[0] == "ell,value,note,extra"
    assert lines[1] == '8,0.1,"a,b",'
    assert lines[2] == '16,,,"{""k"":1}"'


def test_write_jsonl(tmp_path):
    path = tmp_path / "rows.jsonl"
    write_jsonl(str(path), [{"b": 2, "a": 1}, {"x": None}])
    assert path.read_text(encoding="utf-8") == '{"a":1,"b":2}\n{"x":null}\n'


def test_parse_int_list():
    assert parse_int_list("8, 16,32") == [8, 16, 32]
    with pytest.raises(ValueError):
        parse_int_list(" , ")
    with pytest.raises(ValueError):
        parse_int_list("8,x")


def test_running_stats_merge_equals_whole():
    values = np.linspace(-2.0, 5.0, 37) ** 2
    whole = RunningStats.from_samples(values)
    left = RunningStats.from_samples(values[:10])
    right = RunningStats.from_samples(values[10:])
    merged = left.merge(right)
    assert merged.count == whole.count
    assert merged.mean == pytest.approx(whole.mean, rel=1e-12)
    assert merged.variance == pytest.approx(np.var(values, ddof=1), rel=1e-12)

    pushed = RunningStats()
    for v in values:
        pushed.push(v)
    assert pushed.variance == pytest.approx(whole.variance, rel=1e-10)


def test_running_stats_small_counts():
    stats = RunningStats.from_samples([3.0])
    assert math.isnan(stats.variance)
    assert stats.to_json() == {"count": 1, "mean": 3.0, "variance": None, "std_error": None}
    assert RunningStats.from_samples([]).count == 0


def test_streams_are_keyed():
    a = stream(5, 1, 2).standard_normal(4)
    b = stream(5, 1, 2).standard_normal(4)
    c = stream(5, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert derive_seed(5, 1) == derive_seed(5, 1)
    assert derive_seed(5, 1) != derive_seed(5, 2)
    assert 0 <= derive_seed(5, 1) < 2 ** 63
    with pytest.raises(ValueError):
        stream(-1)
    with pytest.raises(ValueError):
        stream(1, -2)


def test_uniform_sphere_points():
    pts = uniform_sphere(stream(0), 500, 3)
    assert pts.shape == (500, 4)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.all(np.abs(pts.mean(axis=0)) < 0.15)


def test_shard_sizes():
    assert shard_sizes(10, 4) == [4, 4, 2]
    assert shard_sizes(8, 4) == [4, 4]
    assert shard_sizes(0, 4) == []
    with pytest.raises(ValueError):
        shard_sizes(10, 0)


def test_run_log_tags_thread_records(tmp_path):
    log = logging.getLogger("hsl.test")
    path = tmp_path / "sub" / "run.log"

    async def scenario():
        handler = attach_run_log(str(path), "rates#7")
        old_level = logging.getLogger().level
        logging.getLogger().setLevel(logging.INFO)
        try:
            log.info("trong loop")
            await asyncio.to_thread(log.info, "trong thread %s", 1)
        finally:
            logging.getLogger().setLevel(old_level)
            detach_run_log(handler)
        log.info("sau khi tháo")

    asyncio.run(scenario())
    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert [line["message"] for line in lines] == ["trong loop", "trong thread 1"]
    assert {line["run"] for line in lines} == {"rates#7"}
    assert "thread" in lines[1]
