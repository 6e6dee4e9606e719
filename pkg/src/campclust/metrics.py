"""Train/test splitting and regression error measures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError, NumericError, RangeError
from .rng import SplitMix64
from .tabular import Table


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction <= 0.5:
            raise RangeError(f"test fraction must lie in (0, 0.5], got {self.test_fraction}")

    def test_size(self, n: int) -> int:
        # round half up, then keep both sides non-empty
        size = math.floor(n * self.test_fraction + 0.5)
        return min(max(size, 1), n - 1)


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise InsufficientDataError(f"need at least 2 rows to split, got {n}")
    perm = SplitMix64(spec.seed).permutation(n)
    t = spec.test_size(n)
    return np.sort(perm[t:]), np.sort(perm[:t])


def train_test_split(table: Table, spec: SplitSpec) -> tuple[Table, Table]:
    train, test = split_indices(table.row_count, spec)
    return table.take(train), table.take(test)


def _pair(predictions, targets) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if h.shape != y.shape:
        raise DomainError(f"length mismatch: {h.size} predictions vs {y.size} targets")
    if h.size == 0:
        raise InsufficientDataError("empty prediction vector")
    return h, y


def rmse(predictions, targets) -> float:
    h, y = _pair(predictions, targets)
    return math.sqrt(float(np.mean((h - y) ** 2)))


def mae(predictions, targets) -> float:
    h, y = _pair(predictions, targets)
    return float(np.mean(np.abs(h - y)))


def r2(predictions, targets) -> float:
    h, y = _pair(predictions, targets)
    if h.size < 2:
        raise InsufficientDataError("R^2 needs at least 2 targets")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise NumericError("R^2 undefined for constant targets")
    return 1.0 - float(((y - h) ** 2).sum()) / ss_tot


@dataclass(frozen=True)
class RegressionMetrics:
    rmse: float
    mae: float
    r2: float

    @classmethod
    def compute(cls, predictions, targets) -> RegressionMetrics:
        return cls(rmse(predictions, targets), mae(predictions, targets), r2(predictions, targets))
