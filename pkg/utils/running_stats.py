#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""Thống kê chạy (count, mean, M2) gộp được theo kiểu Chan–Golub–LeVeque."""

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable

import numpy as np


@dataclass
class RunningStats:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_samples(cls, values: Iterable[float]) -> "RunningStats":
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float).ravel()
        if arr.size == 0:
            return cls()
        mean = float(arr.mean())
        return cls(count=int(arr.size), mean=mean, m2=float(np.sum((arr - mean) ** 2)))

    def push(self, value: float) -> None:
        self.merge(RunningStats(count=1, mean=float(value), m2=0.0))

    def merge(self, other: "RunningStats") -> "RunningStats":
        """Gộp `other` vào self (in-place) và trả về self."""
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / total
        self.m2 += other.m2 + delta * delta * self.count * other.count / total
        self.count = total
        return self

    @property
    def variance(self) -> float:
        """Phương sai mẫu (chia n − 1); NaN khi count < 2."""
        if self.count < 2:
            return float("nan")
        return self.m2 / (self.count - 1)

    @property
    def std_error(self) -> float:
        if self.count < 2:
            return float("nan")
        return math.sqrt(self.variance / self.count)

    def to_json(self) -> Dict[str, Any]:
        return {
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance if self.count >= 2 else None,
            "std_error": self.std_error if self.count >= 2 else None,
        }
