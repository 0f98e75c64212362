"""Labelled datasets: CSV ingestion, unit-ball scaling and synthetic generators."""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError, InputError
from .lsh import augment_data, classification_transform

__all__ = [
    "Dataset",
    "load_csv",
    "save_csv",
    "normalize",
    "gen_synthetic_regression",
    "gen_synthetic_classification",
]

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Feature matrix ``X`` (n x d) and targets ``y``.

    ``task`` is ``"regression"`` (real ``y``) or ``"classification"``
    (``y`` in {-1, +1}). After :func:`normalize`, classification data
    carries an extra bias column (the scaled constant -1) and ``scale``
    records the factor applied to every row.
    """

    X: np.ndarray
    y: np.ndarray
    task: str = "regression"
    scale: float = 1.0
    normalized: bool = False
    bias_appended: bool = False
    clipped: int = 0
    source_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise InputError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}")
        if self.task not in ("regression", "classification"):
            raise InputError(f"unknown task {self.task!r}")
        if self.task == "classification" and not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise InputError("classification labels must be -1 or +1")
        if not self.source_hash:
            h = hashlib.sha256(self.X.tobytes())
            h.update(self.y.tobytes())
            self.source_hash = h.hexdigest()[:16]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def rows(self) -> np.ndarray:
        """Joint vectors ``[x, y]`` (regression) or ``x_bar`` (classification)."""
        if self.task == "regression":
            return np.column_stack([self.X, self.y])
        return self.X

    def augmented(self) -> np.ndarray:
        """Unit-norm vectors ready for sketch insertion."""
        if not self.normalized:
            raise InputError("dataset must be normalized before sketching")
        if self.task == "regression":
            return augment_data(self.rows())
        return classification_transform(self.X, self.y)

    def subset(self, idx) -> Dataset:
        return replace(self, X=self.X[idx], y=self.y[idx], source_hash="")


def load_csv(path, delimiter: str = ",", header: bool = False, target_column: int = -1,
             task: str = "regression") -> Dataset:
    """Read a numeric CSV. Rows keep their input order."""
    path = Path(path)
    data = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                data.append([float(c) for c in row])
            except ValueError:
                col = next(i for i, c in enumerate(row) if not _is_float(c))
                raise InputError(f"{path}: non-numeric cell {row[col]!r} at row {lineno}, column {col + 1}") from None
    if not data:
        raise InputError(f"{path}: no data rows")
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise InputError(f"{path}: ragged rows (widths {sorted(widths)})")
    arr = np.array(data)
    if arr.shape[1] < 2:
        raise InputError(f"{path}: need at least one feature and a target column")
    tc = target_column % arr.shape[1]
    X = np.delete(arr, tc, axis=1)
    y = arr[:, tc]
    logger.info("loaded %s: %d rows, %d features", path, X.shape[0], X.shape[1])
    return Dataset(X, y, task=task, meta={"source": str(path)})


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_csv(dataset: Dataset, path, header: bool = True) -> None:
    """Write features followed by the target column."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{i}" for i in range(dataset.d)] + ["y"])
        for x, y in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def normalize(dataset: Dataset, c_max: float = 0.99, norm_bound: float | None = None) -> Dataset:
    """Scale every row uniformly into the ball of radius ``c_max``.

    Regression scales the joint vector ``[x, y]``; this keeps the
    through-origin hyperplane intact, so a ``theta`` fitted on scaled data
    applies unchanged to the original. Classification first appends the
    constant -1 bias feature and scales ``x_bar`` only.

    With ``norm_bound`` the scale is fixed a priori (single pass); rows
    whose norm exceeds the bound are shrunk onto the ball and counted in
    ``clipped``.
    """
    if dataset.normalized:
        raise InputError("dataset is already normalized")
    if not 0 < c_max < 1:
        raise InputError(f"c_max must lie in (0, 1), got {c_max}")
    if dataset.n == 0:
        raise InputError("empty dataset")
    X = dataset.X
    if dataset.task == "classification":
        X = np.column_stack([X, -np.ones(dataset.n)])
        joint = X
    else:
        joint = np.column_stack([X, dataset.y])
    norms = np.linalg.norm(joint, axis=1)
    clipped = 0
    if norm_bound is None:
        top = norms.max()
        if top == 0:
            raise DegenerateDataError("every row is zero; cannot normalize")
        s = c_max / top
        joint = joint * s
    else:
        if norm_bound <= 0:
            raise InputError("norm_bound must be positive")
        s = c_max / norm_bound
        over = norms > norm_bound
        clipped = int(over.sum())
        joint = joint * s
        if clipped:
            joint[over] *= (norm_bound / norms[over])[:, None]
            logger.warning("clipped %d rows exceeding the norm bound %g", clipped, norm_bound)
    if dataset.task == "classification":
        X_new, y_new = joint, dataset.y
    else:
        X_new, y_new = joint[:, :-1], joint[:, -1]
    return replace(dataset, X=X_new, y=y_new, scale=float(s), normalized=True,
                   bias_appended=dataset.task == "classification", clipped=clipped,
                   source_hash=dataset.source_hash)


def _uniform_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return g * r[:, None]


def gen_synthetic_regression(n: int, d: int, theta_star=None, noise_sigma: float = 0.0,
                             seed: int = 0, radius: float = 1.0) -> Dataset:
    """``x`` uniform in a ball, ``y = <theta_star, x> + N(0, noise_sigma^2)``.

    ``theta_star`` defaults to a seeded standard normal draw.
    """
    if n < 1 or d < 1:
        raise InputError("n and d must be positive")
    rng = np.random.default_rng(seed)
    if theta_star is None:
        theta_star = rng.standard_normal(d)
    theta_star = np.asarray(theta_star, dtype=np.float64).reshape(-1)
    if theta_star.shape[0] != d:
        raise InputError(f"theta_star has length {theta_star.shape[0]}, expected {d}")
    X = _uniform_ball(rng, n, d, radius)
    y = X @ theta_star
    if noise_sigma > 0:
        y = y + noise_sigma * rng.standard_normal(n)
    return Dataset(X, y, meta={"theta_star": theta_star.tolist(), "noise_sigma": noise_sigma,
                               "seed": seed})


def gen_synthetic_classification(n: int, separation: float = 4.0, seed: int = 0,
                                 spread: float = 1.0) -> Dataset:
    """Two isotropic 2-D Gaussian blobs, labels +1 and -1.

    Centres sit at ``+-separation/2`` along the diagonal, so the Bayes
    boundary passes through the origin. The class sizes differ by at
    most one.
    """
    if n < 2:
        raise InputError("need at least two points")
    rng = np.random.default_rng(seed)
    n_pos = n // 2 + (n % 2) * int(rng.integers(2))
    labels = np.concatenate([np.ones(n_pos), -np.ones(n - n_pos)])
    rng.shuffle(labels)
    direction = np.array([1.0, 1.0]) / np.sqrt(2.0)
    X = labels[:, None] * (separation / 2.0) * direction + spread * rng.standard_normal((n, 2))
    return Dataset(X, labels, task="classification",
                   meta={"separation": separation, "seed": seed, "spread": spread})
