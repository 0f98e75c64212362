"""Training on sketches and the exact references it is checked against.

``dfo_train`` only ever evaluates the sketch. Each step samples ``k``
points on a sphere of radius ``sigma`` around the current query, and
forms the sphere-smoothing gradient estimate

    g = D / (k sigma^2) * sum_j (L(v_j) - L(theta)) (v_j - theta)

where ``D`` is the query dimension. Regression queries are kept on the
affine slice whose last coordinate is -1; classification queries, whose
loss ignores scale, are kept on the unit sphere.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InputError, SingularSystemError
from .lsh import Family, augment_query
from .surrogate import SurrogateParams, classification_gradient, exact_empirical_risk, prp_gradient

__all__ = [
    "OptimizerConfig",
    "TrainTrace",
    "OLSResult",
    "dfo_train",
    "exact_surrogate_train",
    "ols_solve",
    "solve_least_squares",
    "project_constraint",
]

logger = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e6
RIDGE = 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    k: int = 8
    sigma: float = 0.5
    eta: float = 0.1
    iterations: int = 100
    seed: int = 0
    eta_decay: str = "none"

    def __post_init__(self):
        if self.k < 2:
            raise InputError("k must be at least 2")
        if self.sigma <= 0 or self.eta <= 0:
            raise InputError("sigma and eta must be positive")
        if self.iterations < 0:
            raise InputError("iterations must be non-negative")
        if self.eta_decay not in ("none", "inverse_sqrt"):
            raise InputError(f"unknown eta_decay {self.eta_decay!r}")

    def step_size(self, n: int) -> float:
        if self.eta_decay == "inverse_sqrt":
            return self.eta / np.sqrt(n + 1)
        return self.eta


@dataclass
class TrainTrace:
    """Query snapshots and loss values; ``thetas[i]`` has loss ``losses[i]``.

    Index 0 is the starting point, so there are ``iterations + 1`` entries.
    """

    thetas: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    wall_clock: list = field(default_factory=list)
    theta: np.ndarray | None = None
    family: str = "regression"

    def record(self, theta_aug, loss, t0):
        self.thetas.append(np.array(theta_aug))
        self.losses.append(float(loss))
        self.wall_clock.append(time.perf_counter() - t0)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"iteration": i, "loss": loss, "theta_aug": th.tolist(), "elapsed": t})
                 for i, (th, loss, t) in enumerate(zip(self.thetas, self.losses, self.wall_clock))]
        return "\n".join(lines) + ("\n" if lines else "")


def project_constraint(theta_aug) -> np.ndarray:
    """Pin the last coordinate to -1."""
    out = np.array(theta_aug, dtype=np.float64)
    out[-1] = -1.0
    return out


def _project_sphere(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return theta / np.linalg.norm(theta)


def _start(D: int) -> np.ndarray:
    # all-zero start, then the projection: the last coordinate becomes -1
    return project_constraint(np.zeros(D))


def _final_theta(theta_aug: np.ndarray, family: str) -> np.ndarray:
    return theta_aug[:-1].copy() if family == "regression" else theta_aug.copy()


def _guard(theta):
    norm = float(np.linalg.norm(theta))
    if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
        raise DivergenceError(f"optimizer diverged (|theta| = {norm:.3g})")


def dfo_train(sketch, cfg: OptimizerConfig = OptimizerConfig(), median_of_means: int | None = None) -> TrainTrace:
    """Derivative-free minimisation of the sketch's loss estimate.

    Deterministic given the sketch contents and ``cfg.seed``. With zero
    iterations the regression parameter is the zero vector.
    """
    if sketch.family is Family.COMPOSED:
        raise InputError("composed sketches carry no trainable loss")
    if sketch.N == 0:
        raise InputError("cannot train on an empty sketch")
    family = "regression" if sketch.family is Family.PRP else "classification"
    project = project_constraint if family == "regression" else _project_sphere
    D = sketch.d_aug - 1
    rng = np.random.default_rng(cfg.seed)

    def loss(points):
        return sketch.estimate_many(augment_query(np.atleast_2d(points)), median_of_means)

    trace = TrainTrace(family=family)
    t0 = time.perf_counter()
    theta = project(_start(D))
    base = loss(theta)[0]
    trace.record(theta, base, t0)
    for n in range(cfg.iterations):
        u = rng.standard_normal((cfg.k, D))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        vals = loss(theta + cfg.sigma * u)
        grad = D / (cfg.k * cfg.sigma) * ((vals - base) @ u)
        theta = project(theta - cfg.step_size(n) * grad)
        _guard(theta)
        base = loss(theta)[0]
        trace.record(theta, base, t0)
    trace.theta = _final_theta(theta, family) if cfg.iterations else np.zeros(D - 1 if family == "regression" else D)
    return trace


def exact_surrogate_train(dataset, params: SurrogateParams = SurrogateParams(),
                          cfg: OptimizerConfig = OptimizerConfig()) -> TrainTrace:
    """Gradient descent on the exact mean surrogate loss (no sketch noise).

    Uses the same start point and projections as :func:`dfo_train`, so
    the two trajectories are directly comparable.
    """
    if not dataset.normalized:
        raise InputError("dataset must be normalized")
    family = params.family
    if family == "regression":
        rows = dataset.rows()
        project = project_constraint
    else:
        rows = dataset.y[:, None] * dataset.X
        project = _project_sphere
    D = rows.shape[1]

    def risk(theta_aug):
        theta = theta_aug[:-1] if family == "regression" else theta_aug
        return exact_empirical_risk(theta, dataset, params).mean_surrogate

    def grad(theta_aug):
        if family == "regression":
            return prp_gradient(theta_aug, rows, params.p).mean(axis=0)
        return classification_gradient(theta_aug, rows, params.p).mean(axis=0)

    trace = TrainTrace(family=family)
    t0 = time.perf_counter()
    theta = project(_start(D))
    trace.record(theta, risk(theta), t0)
    for n in range(cfg.iterations):
        theta = project(theta - cfg.step_size(n) * grad(theta))
        _guard(theta)
        trace.record(theta, risk(theta), t0)
    trace.theta = _final_theta(theta, family) if cfg.iterations else np.zeros(D - 1 if family == "regression" else D)
    return trace


@dataclass(frozen=True)
class OLSResult:
    theta: np.ndarray
    ridge: float = 0.0

    @property
    def ridged(self) -> bool:
        return self.ridge > 0


def solve_least_squares(X, y) -> OLSResult:
    """Normal-equation least squares, ridge-rescued only if singular."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] == 0:
        raise InputError("no rows to fit")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("non-finite values in the design matrix or targets")
    with np.errstate(over="ignore", invalid="ignore"):
        A = X.T @ X
        rhs = X.T @ y
    d = A.shape[0]
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(rhs))):
        raise SingularSystemError("normal equations overflow")
    if np.linalg.matrix_rank(A) == d:
        try:
            return OLSResult(np.linalg.solve(A, rhs))
        except np.linalg.LinAlgError:
            pass
    logger.warning("normal equations singular (%d rows, %d features); adding ridge %g", X.shape[0], d, RIDGE)
    try:
        theta = np.linalg.solve(A + RIDGE * np.eye(d), rhs)
    except np.linalg.LinAlgError:
        raise SingularSystemError("normal equations are singular even with ridge") from None
    if not np.all(np.isfinite(theta)):
        raise SingularSystemError("normal equations are singular even with ridge")
    return OLSResult(theta, RIDGE)


def ols_solve(dataset) -> OLSResult:
    return solve_least_squares(dataset.X, dataset.y)
