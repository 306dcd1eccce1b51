#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Luồng số ngẫu nhiên có thể tái lập khi chạy song song.

Mỗi luồng được định danh bởi (master seed, khoá luồng), vd (seed, ℓ, replicate)
hay (seed, shard). Bit generator là Philox (counter-based) nên hai khoá khác
nhau cho hai dãy độc lập, và kết quả không phụ thuộc thứ tự các thread chạy.
"""

import logging
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

_MASK_64 = (1 << 64) - 1


def _entropy(seed: int, key: Sequence[int]) -> list:
    if seed < 0:
        raise ValueError(f"Seed phải ≥ 0, nhận được {seed}.")
    words = [int(seed) & _MASK_64]
    for part in key:
        part = int(part)
        if part < 0:
            raise ValueError(f"Khoá luồng phải ≥ 0, nhận được {tuple(key)}.")
        words.append(part & _MASK_64)
    return words


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator Philox cho luồng `(seed, *key)`; cùng khoá → cùng dãy."""
    seq = np.random.SeedSequence(_entropy(seed, key))
    return np.random.Generator(np.random.Philox(seq))


def uniform_sphere(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """`count` điểm đều trên S^d ⊂ R^{d+1} (chuẩn hoá vector Gauss)."""
    x = rng.standard_normal((count, d + 1))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # Xác suất norm = 0 bằng 0, nhưng tránh chia cho 0 khi dùng float
    norms[norms == 0.0] = 1.0
    return x / norms


def shard_sizes(total: int, shard_size: int) -> list:
    """Chia `total` mẫu thành các shard cố định kích thước (shard cuối có thể nhỏ hơn)."""
    if total < 0 or shard_size <= 0:
        raise ValueError(f"total={total}, shard_size={shard_size} không hợp lệ.")
    full, rest = divmod(total, shard_size)
    sizes = [shard_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def derive_seed(seed: int, *key: int) -> int:
    """Seed con 63-bit cho luồng `(seed, *key)`, dùng khi API chỉ nhận một số nguyên."""
    seq = np.random.SeedSequence(_entropy(seed, key))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
