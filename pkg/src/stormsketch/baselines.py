"""Memory-matched comparators: reservoir sampling + OLS, and Clarkson-Woodruff sketch-and-solve.

Storage is accounted at 4 bytes per stored real, the smallest standard
floating-point type, so byte budgets line up with the 4-byte counters
of a STORM sketch. Values are held in float64 internally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleSketchError, InputError
from .lsh import mix_seed, splitmix64_array
from .optimizer import OLSResult, solve_least_squares
from .sketch import HEADER

__all__ = [
    "MemoryBudget",
    "ReservoirSampler",
    "CountSketchLS",
    "reservoir_sample_train",
    "cw_sketch_train",
]

logger = logging.getLogger(__name__)

BYTES_PER_VALUE = 4


@dataclass(frozen=True)
class MemoryBudget:
    bytes: int

    def __post_init__(self):
        if self.bytes < 1:
            raise InputError("budget must be positive")

    def sample_rows(self, d: int) -> int:
        """Rows ``[x, y]`` of ``d + 1`` values that fit."""
        return self.bytes // (BYTES_PER_VALUE * (d + 1))

    cw_rows = sample_rows

    def storm_rows(self, B: int) -> int:
        """Sketch repetitions of ``B`` counters that fit beside the header."""
        return max(0, (self.bytes - HEADER.size) // (BYTES_PER_VALUE * B))


class ReservoirSampler:
    """Uniform single-pass sample of at most ``capacity`` rows (Algorithm R)."""

    def __init__(self, capacity: int, d: int, seed: int = 0):
        if capacity < 1:
            raise InputError("reservoir capacity must be at least 1")
        self.capacity = capacity
        self.d = d
        self.rng = np.random.default_rng(seed)
        self.rows = np.empty((capacity, d + 1))
        self.indices = np.empty(capacity, dtype=np.int64)
        self.seen = 0

    def add(self, x, y) -> None:
        i = self.seen
        if i < self.capacity:
            slot = i
        else:
            slot = int(self.rng.integers(0, i + 1))
        if slot < self.capacity:
            self.rows[slot, :-1] = x
            self.rows[slot, -1] = y
            self.indices[slot] = i
        self.seen += 1

    def extend(self, X, y) -> ReservoirSampler:
        for xi, yi in zip(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64)):
            self.add(xi, yi)
        return self

    @property
    def size(self) -> int:
        return min(self.seen, self.capacity)

    @property
    def nbytes(self) -> int:
        return self.capacity * (self.d + 1) * BYTES_PER_VALUE

    def sample(self) -> tuple[np.ndarray, np.ndarray]:
        kept = self.rows[:self.size]
        return kept[:, :-1], kept[:, -1]

    def solve(self) -> OLSResult:
        if self.seen == 0:
            raise InputError("empty stream")
        X, y = self.sample()
        if X.shape[0] < self.d:
            logger.warning("reservoir holds %d rows for %d features; system is under-determined",
                           X.shape[0], self.d)
        return solve_least_squares(X, y)


class CountSketchLS:
    """Count-sketch embedding ``S [X | y]`` with ``m`` output rows.

    Input row ``i`` (its global stream position) is added with a random
    sign to one output row, both derived from ``(seed, i)``. Shards of
    one stream built with the same seed and their true start offsets
    merge exactly.
    """

    def __init__(self, m: int, d: int, seed: int = 0, offset: int = 0):
        if m < 1:
            raise InputError("sketch needs at least one row")
        self.m = m
        self.d = d
        self.seed = seed
        self._key = np.uint64(mix_seed(seed, 0))
        self.SA = np.zeros((m, d + 1))
        self.offset = offset
        self.seen = 0

    def route(self, index) -> tuple[np.ndarray, np.ndarray]:
        """Output row and sign for global row indices."""
        h = splitmix64_array(np.asarray(index, dtype=np.uint64) ^ self._key)
        bucket = (h % np.uint64(self.m)).astype(np.int64)
        sign = np.where((h >> np.uint64(63)) == 1, -1.0, 1.0)
        return bucket, sign

    def update(self, X, y) -> CountSketchLS:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[1] != self.d or X.shape[0] != y.shape[0]:
            raise InputError(f"expected (n, {self.d}) features and n targets")
        idx = np.arange(X.shape[0], dtype=np.uint64) + np.uint64(self.offset + self.seen)
        bucket, sign = self.route(idx)
        np.add.at(self.SA, bucket, sign[:, None] * np.column_stack([X, y]))
        self.seen += X.shape[0]
        return self

    def merge(self, other: CountSketchLS) -> CountSketchLS:
        if (self.m, self.d, self.seed) != (other.m, other.d, other.seed):
            raise IncompatibleSketchError({"m,d,seed": ((self.m, self.d, self.seed),
                                                        (other.m, other.d, other.seed))})
        out = CountSketchLS(self.m, self.d, self.seed, min(self.offset, other.offset))
        out.SA = self.SA + other.SA
        out.seen = self.seen + other.seen
        return out

    @property
    def nbytes(self) -> int:
        return self.m * (self.d + 1) * BYTES_PER_VALUE

    def solve(self) -> OLSResult:
        if self.m < self.d + 1:
            logger.warning("count sketch has %d rows for %d unknowns", self.m, self.d)
        return solve_least_squares(self.SA[:, :-1], self.SA[:, -1])


def reservoir_sample_train(X, y, budget: MemoryBudget | int, seed: int = 0) -> OLSResult:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    budget = MemoryBudget(budget) if isinstance(budget, int) else budget
    m = budget.sample_rows(X.shape[1])
    if m < 1:
        raise InputError(f"budget of {budget.bytes} bytes holds no rows")
    return ReservoirSampler(m, X.shape[1], seed).extend(X, y).solve()


def cw_sketch_train(X, y, m: int, seed: int = 0) -> OLSResult:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if m < X.shape[1] + 1:
        raise InputError(f"count sketch needs at least d+1={X.shape[1] + 1} rows, got {m}")
    return CountSketchLS(m, X.shape[1], seed).update(X, y).solve()
