"""Seeded signed-random-projection hash families.

A hash function is a ``p x d_aug`` Gaussian matrix ``W``; the code of a
vector ``v`` packs the signs of ``W @ v`` into an integer, bit ``i`` set
iff ``<W_i, v> > 0``. Exact zeros map to bit 0.

Data and queries are augmented asymmetrically so that the collision
probability tracks the inner product instead of the angle:

    data   b  ->  [b, sqrt(1 - |b|^2)]     (requires |b| <= 1)
    query  q  ->  [q, 0]

Every matrix is regenerated from ``(seed, index)`` through a splitmix64
mix and a PCG64 stream, so two machines holding the same seed build the
same ensemble. That is what makes sketches from different devices
mergeable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InputError, NormalizationError

__all__ = [
    "Family",
    "HashFamilyConfig",
    "HashFunction",
    "HashEnsemble",
    "mix_seed",
    "srp_hash",
    "collision_probability_srp",
    "augment_data",
    "augment_query",
    "prp_codes",
    "complement",
    "classification_transform",
    "compose_product",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Norms up to 1 + _NORM_SLACK are treated as on the unit sphere.
_NORM_SLACK = 1e-12


def _splitmix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Derive the 64-bit seed of hash function ``index`` from a master seed."""
    if not 0 <= seed <= _MASK64:
        raise InputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return _splitmix64(seed ^ _splitmix64(index))


def splitmix64_array(values: np.ndarray) -> np.ndarray:
    """Vectorised splitmix64 over a uint64 array (wrapping arithmetic)."""
    z = np.asarray(values, dtype=np.uint64) + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Family(enum.IntEnum):
    """Sketch families. Values are the on-disk family codes."""

    PRP = 0
    CLASSIFICATION = 1
    COMPOSED = 2


@dataclass(frozen=True)
class HashFamilyConfig:
    """Everything needed to regenerate a hash ensemble.

    ``p`` is the number of hyperplanes per hash function. PRP and
    classification rows use one function (``B = 2**p`` buckets); composed
    rows pair two independent functions (``B = 2**p * 2**p``).
    """

    family: Family
    p: int
    d_aug: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        max_p = 15 if self.family is Family.COMPOSED else 31
        if not 1 <= self.p <= max_p:
            raise InputError(f"p must be in [1, {max_p}] for {self.family.name}, got {self.p}")
        if self.d_aug < 1:
            raise InputError(f"d_aug must be positive, got {self.d_aug}")
        if not 0 <= self.seed <= _MASK64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def functions_per_row(self) -> int:
        return 2 if self.family is Family.COMPOSED else 1

    @property
    def B(self) -> int:
        return (1 << self.p) ** self.functions_per_row


@dataclass(frozen=True, eq=False)
class HashFunction:
    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2:
            raise InputError("W must be a 2-D matrix")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @classmethod
    def generate(cls, seed: int, index: int, p: int, d_aug: int) -> HashFunction:
        rng = np.random.Generator(np.random.PCG64(mix_seed(seed, index)))
        return cls(rng.standard_normal((p, d_aug)))

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def d_aug(self) -> int:
        return self.W.shape[1]

    def __eq__(self, other):
        if not isinstance(other, HashFunction):
            return NotImplemented
        return np.array_equal(self.W, other.W)

    __hash__ = None


def _weights(p: int) -> np.ndarray:
    return np.left_shift(np.int64(1), np.arange(p, dtype=np.int64))


def _check_vector(v, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != d:
        raise InputError(f"expected vectors of length {d}, got {v.shape[-1]}")
    return v


def srp_hash(W: HashFunction | np.ndarray, v) -> int:
    """Sign pattern of the projections of ``v``, packed into an int."""
    W = W.W if isinstance(W, HashFunction) else np.asarray(W, dtype=np.float64)
    v = _check_vector(v, W.shape[1])
    if v.ndim != 1:
        raise InputError("srp_hash takes a single vector")
    bits = (W @ v) > 0
    return int(bits @ _weights(W.shape[0]))


def complement(code, p: int):
    """Bitwise complement within ``p`` bits (the code of ``-v``)."""
    return ((1 << p) - 1) ^ code


def collision_probability_srp(x, y) -> float:
    """Probability that one random hyperplane puts ``x`` and ``y`` on the same side."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InputError(f"shape mismatch: {x.shape} vs {y.shape}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise InputError("collision probability is undefined for the zero vector")
    # angle via atan2 of the rejection norm; acos loses half the digits near 0 and pi
    ux, uy = x / nx, y / ny
    dot = float(np.dot(ux, uy))
    rej = float(np.linalg.norm(uy - dot * ux))
    if rej < 1e-15:
        return 1.0 if dot > 0 else 0.0
    return float(1.0 - math.atan2(rej, dot) / math.pi)


def augment_data(b) -> np.ndarray:
    """Append ``sqrt(1 - |b|^2)`` so the result has unit norm.

    Works row-wise on 2-D input. Raises ``NormalizationError`` when a
    row lies outside the unit ball.
    """
    b = np.asarray(b, dtype=np.float64)
    sq = np.einsum("...i,...i->...", b, b)
    worst = float(np.max(sq)) if sq.size else 0.0
    if worst > (1.0 + _NORM_SLACK) ** 2:
        raise NormalizationError(math.sqrt(worst))
    extra = np.sqrt(np.clip(1.0 - sq, 0.0, None))
    return np.concatenate([b, extra[..., None]], axis=-1)


def augment_query(q) -> np.ndarray:
    """Append a zero coordinate. Works row-wise on 2-D input."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(~np.any(q != 0, axis=-1)):
        raise InputError("query vector must be nonzero")
    return np.concatenate([q, np.zeros(q.shape[:-1] + (1,))], axis=-1)


def prp_codes(W: HashFunction, b_aug) -> tuple[int, int]:
    """Codes of ``b_aug`` and ``-b_aug`` under the same hash function.

    The negative code is taken as the bitwise complement so the pair is
    always distinct, even when a projection is exactly zero.
    """
    pos = srp_hash(W, b_aug)
    return pos, complement(pos, W.p)


def classification_transform(x_bar, label) -> np.ndarray:
    """Augmented data vector for a labelled example: ``augment_data(-label * x_bar)``.

    Accepts a single vector with a scalar label, or a matrix with a label
    per row.
    """
    x_bar = np.asarray(x_bar, dtype=np.float64)
    label = np.asarray(label)
    if not np.all((label == 1) | (label == -1)):
        raise InputError("labels must be -1 or +1")
    return augment_data(-label[..., None] * x_bar if label.ndim else -float(label) * x_bar)


def compose_product(code1, code2, B1: int, B2: int):
    """Injective pairing ``code1 * B2 + code2`` of two bounded codes."""
    c1 = np.asarray(code1)
    c2 = np.asarray(code2)
    if np.any((c1 < 0) | (c1 >= B1)) or np.any((c2 < 0) | (c2 >= B2)):
        raise InputError(f"codes out of range [0,{B1}) x [0,{B2})")
    out = c1.astype(np.int64) * B2 + c2
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HashEnsemble:
    """The R row hashes of a sketch, regenerated from the config seed.

    Row ``r`` uses hash functions with indices ``r * functions_per_row + j``.
    """

    config: HashFamilyConfig
    R: int
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.R < 1:
            raise InputError(f"R must be positive, got {self.R}")
        cfg = self.config
        m = cfg.functions_per_row
        stack = np.empty((self.R * m * cfg.p, cfg.d_aug))
        for i in range(self.R * m):
            stack[i * cfg.p:(i + 1) * cfg.p] = HashFunction.generate(cfg.seed, i, cfg.p, cfg.d_aug).W
        stack.setflags(write=False)
        object.__setattr__(self, "_stack", stack)

    def function(self, row: int, j: int = 0) -> HashFunction:
        p = self.config.p
        i = row * self.config.functions_per_row + j
        return HashFunction(self._stack[i * p:(i + 1) * p])

    @cached_property
    def _bit_weights(self) -> np.ndarray:
        return _weights(self.config.p)

    def raw_codes(self, V: np.ndarray) -> np.ndarray:
        """Per-function codes, shape ``(n, R, functions_per_row)``."""
        V = _check_vector(V, self.config.d_aug)
        V = np.atleast_2d(V)
        cfg = self.config
        n = V.shape[0]
        out = np.empty((n, self.R, cfg.functions_per_row), dtype=np.int64)
        # bound the projection buffer to ~4M doubles
        chunk = max(1, (1 << 22) // self._stack.shape[0])
        for s in range(0, n, chunk):
            proj = V[s:s + chunk] @ self._stack.T
            bits = (proj > 0).reshape(-1, self.R, cfg.functions_per_row, cfg.p)
            out[s:s + chunk] = bits @ self._bit_weights
        return out

    def codes(self, V: np.ndarray) -> np.ndarray:
        """Row codes in ``[0, B)``, shape ``(n, R)``; composed rows are paired."""
        raw = self.raw_codes(V)
        if self.config.functions_per_row == 1:
            return raw[..., 0]
        b = 1 << self.config.p
        return raw[..., 0] * b + raw[..., 1]
