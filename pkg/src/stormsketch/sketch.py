"""The STORM count sketch.

An ``R x B`` array of 32-bit counters. Row ``r`` owns one LSH function;
inserting a vector increments the bucket(s) its code selects, and
querying averages the counters a query vector lands in across rows.
Because the hash ensemble is a pure function of the config seed, two
sketches with the same header merge by element-wise addition.

Binary layout (little-endian)::

    magic "STRM" | version u16 | family u8 | p u8 | d_aug u32 | R u32 | B u32
    | master_seed u64 | N u64 | R*B counts u32 (row-major)
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    CapacityError,
    EmptySketchError,
    IncompatibleSketchError,
    InputError,
    SketchFormatError,
    TruncatedSketchError,
    UnsupportedVersionError,
)
from .lsh import Family, HashEnsemble, HashFamilyConfig, complement

__all__ = [
    "Sketch",
    "LossEstimate",
    "new_sketch",
    "build_sketch",
    "merge",
    "combine_weighted",
    "serialize",
    "deserialize",
    "HEADER",
    "MAGIC",
    "VERSION",
    "DEFAULT_MEMORY_CAP",
]

logger = logging.getLogger(__name__)

MAGIC = b"STRM"
VERSION = 1
HEADER = struct.Struct("<4sHBBIIIQQ")
DEFAULT_MEMORY_CAP = 1 << 30
_U32_MAX = np.iinfo(np.uint32).max


@lru_cache(maxsize=64)
def _ensemble(config: HashFamilyConfig, R: int) -> HashEnsemble:
    return HashEnsemble(config, R)


@dataclass(frozen=True)
class LossEstimate:
    value: float
    raw_mean_count: float
    rows_used: int


class Sketch:
    """Mutable count array plus the header needed to regenerate its hashes.

    One writer at a time; shard a stream across sketches with the same
    seed and :func:`merge` them for parallel ingestion.
    """

    def __init__(self, config: HashFamilyConfig, R: int, counts: np.ndarray | None = None,
                 N: int = 0, memory_cap: int = DEFAULT_MEMORY_CAP):
        if R < 1:
            raise InputError(f"R must be positive, got {R}")
        B = config.B
        if R * B * 4 > memory_cap:
            raise CapacityError(f"{R}x{B} counters need {R * B * 4} bytes, cap is {memory_cap}")
        self.config = config
        self.R = R
        if counts is None:
            counts = np.zeros((R, B), dtype=np.uint32)
        else:
            counts = np.asarray(counts)
            if counts.shape != (R, B):
                raise InputError(f"counts have shape {counts.shape}, expected {(R, B)}")
            counts = counts.astype(np.uint32)
        self.counts = counts
        self.N = int(N)

    @property
    def B(self) -> int:
        return self.config.B

    @property
    def family(self) -> Family:
        return self.config.family

    @property
    def master_seed(self) -> int:
        return self.config.seed

    @property
    def d_aug(self) -> int:
        return self.config.d_aug

    @property
    def nbytes(self) -> int:
        return HEADER.size + 4 * self.R * self.B

    @property
    def ensemble(self) -> HashEnsemble:
        return _ensemble(self.config, self.R)

    def __repr__(self):
        return (f"Sketch(family={self.family.name}, p={self.config.p}, d_aug={self.d_aug}, "
                f"R={self.R}, B={self.B}, N={self.N}, seed={self.master_seed})")

    def __eq__(self, other):
        if not isinstance(other, Sketch):
            return NotImplemented
        return (self.config == other.config and self.R == other.R and self.N == other.N
                and np.array_equal(self.counts, other.counts))

    __hash__ = None

    def copy(self) -> Sketch:
        return Sketch(self.config, self.R, self.counts.copy(), self.N)

    # -- ingestion -------------------------------------------------------

    def insert(self, b_aug) -> Sketch:
        """Insert one augmented example (see :meth:`insert_many`)."""
        b_aug = np.asarray(b_aug, dtype=np.float64)
        if b_aug.ndim != 1:
            raise InputError("insert takes a single vector; use insert_many for batches")
        return self.insert_many(b_aug[None, :])

    def insert_many(self, V) -> Sketch:
        """Insert rows of ``V``, each already augmented for this family.

        PRP rows increment the bucket of the vector and of its negation
        (the complement code); other families increment one bucket.
        Counters saturate at 2**32 - 1 with a warning.
        """
        V = np.asarray(V, dtype=np.float64)
        if V.ndim != 2 or V.shape[1] != self.d_aug:
            raise InputError(f"expected an (n, {self.d_aug}) array, got shape {V.shape}")
        if V.shape[0] == 0:
            return self
        codes = self.ensemble.codes(V)
        if self.family is Family.PRP:
            codes = np.concatenate([codes, complement(codes, self.config.p)])
        flat = (codes + np.arange(self.R, dtype=np.int64) * self.B).ravel()
        add = np.bincount(flat, minlength=self.R * self.B).reshape(self.R, self.B)
        self._accumulate(add)
        self.N += V.shape[0]
        return self

    def _accumulate(self, add: np.ndarray) -> None:
        total = self.counts.astype(np.uint64) + add.astype(np.uint64)
        if total.max(initial=0) > _U32_MAX:
            logger.warning("sketch counters saturated at 2**32-1 (%d cells)", int((total > _U32_MAX).sum()))
            total = np.minimum(total, _U32_MAX)
        self.counts = total.astype(np.uint32)

    # -- queries ---------------------------------------------------------

    def _check_nonempty(self):
        if self.N == 0:
            raise EmptySketchError("cannot query an empty sketch")

    def _row_values(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=np.float64)
        if Q.shape[-1] != self.d_aug:
            raise InputError(f"query has length {Q.shape[-1]}, expected {self.d_aug}")
        codes = self.ensemble.codes(np.atleast_2d(Q))
        return self.counts[np.arange(self.R), codes].astype(np.float64)

    def query_many(self, Q, median_of_means: int | None = None) -> np.ndarray:
        """Mean counter value hit by each query row.

        With ``median_of_means=g`` the rows are split into ``g`` groups
        and the median of the group means is returned instead.
        """
        self._check_nonempty()
        vals = self._row_values(Q)
        if not median_of_means or median_of_means == 1:
            return vals.mean(axis=1)
        g = int(median_of_means)
        if not 1 <= g <= self.R:
            raise InputError(f"median_of_means must be in [1, {self.R}]")
        groups = np.array_split(vals, g, axis=1)
        return np.median(np.stack([grp.mean(axis=1) for grp in groups], axis=1), axis=1)

    def query(self, q, median_of_means: int | None = None) -> float:
        """Mean counter value at the query's bucket in every row."""
        q = np.asarray(q, dtype=np.float64)
        if q.ndim != 1:
            raise InputError("query takes a single vector; use query_many for batches")
        return float(self.query_many(q, median_of_means)[0])

    @property
    def scale(self) -> float:
        """Factor turning a raw mean count into a mean surrogate loss."""
        if self.family is Family.PRP:
            return 1.0 / (2 * self.N)
        if self.family is Family.CLASSIFICATION:
            return 2.0 ** self.config.p / self.N
        return 1.0 / self.N

    def estimate_many(self, Q, median_of_means: int | None = None) -> np.ndarray:
        return self.query_many(Q, median_of_means) * self.scale

    def estimate_mean_loss(self, q, median_of_means: int | None = None) -> LossEstimate:
        raw = self.query(q, median_of_means)
        return LossEstimate(raw * self.scale, raw, self.R)

    # -- merging / IO ----------------------------------------------------

    def header_fields(self) -> dict:
        return {"family": self.family, "p": self.config.p, "d_aug": self.d_aug,
                "R": self.R, "B": self.B, "master_seed": self.master_seed}

    def merge(self, other: Sketch) -> Sketch:
        """Element-wise sum; the result sketches the union of both streams."""
        a, b = self.header_fields(), other.header_fields()
        diff = {k: (a[k], b[k]) for k in a if a[k] != b[k]}
        if diff:
            raise IncompatibleSketchError(diff)
        out = self.copy()
        out._accumulate(other.counts)
        out.N = self.N + other.N
        return out

    __add__ = merge

    def to_bytes(self) -> bytes:
        head = HEADER.pack(MAGIC, VERSION, int(self.family), self.config.p, self.d_aug,
                           self.R, self.B, self.master_seed, self.N)
        return head + self.counts.astype("<u4", copy=False).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> Sketch:
        data = bytes(data)
        if len(data) < 4 or data[:4] != MAGIC:
            raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
        if len(data) < HEADER.size:
            raise TruncatedSketchError(f"header needs {HEADER.size} bytes, got {len(data)}")
        _, version, family, p, d_aug, R, B, seed, N = HEADER.unpack_from(data)
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported sketch version {version}")
        try:
            config = HashFamilyConfig(Family(family), p, d_aug, seed)
        except ValueError as exc:
            raise SketchFormatError(f"invalid header: {exc}") from None
        if config.B != B or R < 1:
            raise SketchFormatError(f"header inconsistent: B={B}, R={R} for {config}")
        expected = HEADER.size + 4 * R * B
        if len(data) < expected:
            raise TruncatedSketchError(f"expected {expected} bytes, got {len(data)}")
        if len(data) > expected:
            raise SketchFormatError(f"{len(data) - expected} trailing bytes after counts")
        counts = np.frombuffer(data, dtype="<u4", count=R * B, offset=HEADER.size).reshape(R, B)
        return cls(config, R, counts.astype(np.uint32), N)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> Sketch:
        return cls.from_bytes(Path(path).read_bytes())


def new_sketch(config: HashFamilyConfig, R: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> Sketch:
    return Sketch(config, R, memory_cap=memory_cap)


def build_sketch(dataset, R: int, p: int = 4, seed: int = 0, family: Family | None = None) -> Sketch:
    """Sketch a normalized dataset in one pass.

    The family defaults to PRP for regression data and CLASSIFICATION for
    labelled data.
    """
    V = dataset.augmented()
    if family is None:
        family = Family.PRP if dataset.task == "regression" else Family.CLASSIFICATION
    sk = new_sketch(HashFamilyConfig(family, p, V.shape[1], seed), R)
    return sk.insert_many(V)


def merge(s1: Sketch, s2: Sketch) -> Sketch:
    return s1.merge(s2)


def combine_weighted(s1: Sketch, w1: float, s2: Sketch, w2: float, q) -> float:
    """``w1 * estimate(s1, q) + w2 * estimate(s2, q)``."""
    return w1 * s1.estimate_mean_loss(q).value + w2 * s2.estimate_mean_loss(q).value


def serialize(s: Sketch) -> bytes:
    return s.to_bytes()


def deserialize(data: bytes) -> Sketch:
    return Sketch.from_bytes(data)
