"""Closed-form surrogate losses that the sketch estimates.

All losses are functions of a normalised margin ``t`` in [-1, 1]. For
regression ``t = <theta_aug, b> / |theta_aug|`` with ``theta_aug =
[theta, -1]`` and ``b = [x, y]``; for classification ``t = y <theta, x_bar>
/ |theta|``. The normalisation by the query norm mirrors what a
sign-based hash can actually see.

These functions double as the exact oracle for sketch estimates and for
the derivative-free optimiser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "SurrogateParams",
    "RiskReport",
    "f_half",
    "prp_loss",
    "prp_loss_slope",
    "prp_gradient",
    "hessian_coefficient",
    "classification_loss",
    "classification_loss_slope",
    "classification_gradient",
    "normalized_margin",
    "exact_empirical_risk",
]

# keeps sqrt(1 - t^2) away from zero
_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class SurrogateParams:
    p: int = 4
    family: str = "regression"

    def __post_init__(self):
        if self.p < 1:
            raise InputError(f"p must be positive, got {self.p}")
        if self.family not in ("regression", "classification"):
            raise InputError(f"unknown family {self.family!r}")


@dataclass
class RiskReport:
    mean_surrogate: float
    mean_squared_error: float
    margins: np.ndarray


def _clamp(t):
    return np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)


def _open_interval(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(np.abs(t) >= 1.0):
        raise DomainError("derivative is singular at |t| = 1")
    return t


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def f_half(t):
    """Single-hyperplane collision probability ``1 - arccos(t)/pi``."""
    return _scalar(1.0 - np.arccos(_clamp(t)) / math.pi)


def prp_loss(t, p: int = 4):
    t = _clamp(t)
    return _scalar(0.5 * f_half(t) ** p + 0.5 * f_half(-t) ** p)


def _inv_sqrt(t):
    return 1.0 / np.sqrt(np.maximum(1.0 - t * t, _EDGE_EPS))


def prp_loss_slope(t, p: int = 4):
    """d/dt of ``prp_loss``. Odd in ``t``, zero at the origin."""
    t = _open_interval(t)
    fp, fm = f_half(t), f_half(-t)
    return _scalar(p * (fp ** (p - 1) - fm ** (p - 1)) * _inv_sqrt(t) / (2 * math.pi))


def hessian_coefficient(t, p: int = 4):
    """d^2/dt^2 of ``prp_loss``.

    The Hessian of the per-example loss in the unnormalised margin is
    ``b b^T`` times this scalar.
    """
    if p < 2:
        raise InputError("curvature is only defined here for p >= 2")
    t = _open_interval(t)
    fp, fm = f_half(t), f_half(-t)
    inv = _inv_sqrt(t)
    term_pow = p * (p - 1) * (fp ** (p - 2) + fm ** (p - 2)) * inv * inv / (2 * math.pi ** 2)
    term_root = p * (fp ** (p - 1) - fm ** (p - 1)) * t * inv ** 3 / (2 * math.pi)
    return _scalar(term_pow + term_root)


def classification_loss(t, p: int = 1):
    """``2**p * f_half(-t)**p``; equals 1 at zero margin, 0 at ``t = 1``."""
    return _scalar(2.0 ** p * f_half(-_clamp(t)) ** p)


def classification_loss_slope(t, p: int = 1):
    t = _open_interval(t)
    return _scalar(-(2.0 ** p) * p * f_half(-t) ** (p - 1) * _inv_sqrt(t) / math.pi)


def normalized_margin(theta_aug, b):
    """``<theta_aug, b> / |theta_aug|`` for one ``b`` or a matrix of rows."""
    theta_aug = np.asarray(theta_aug, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[-1] != theta_aug.shape[0]:
        raise InputError(f"dimension mismatch: {theta_aug.shape[0]} vs {b.shape[-1]}")
    norm = np.linalg.norm(theta_aug)
    if norm == 0:
        raise InputError("query vector must be nonzero")
    return b @ theta_aug / norm


def _margin_gradient(theta_aug, b, t):
    # gradient of <theta, b>/|theta| with respect to theta
    norm = np.linalg.norm(theta_aug)
    return b / norm - np.multiply.outer(t, theta_aug) / norm ** 2


def prp_gradient(theta_aug, b, p: int = 4) -> np.ndarray:
    """Gradient in ``theta_aug`` of ``prp_loss(normalized_margin(theta_aug, b), p)``.

    ``b`` may be a single vector or a matrix; the result then has one
    gradient per row.
    """
    theta_aug = np.asarray(theta_aug, dtype=np.float64)
    t = normalized_margin(theta_aug, b)
    if np.any(np.abs(t) >= 1.0):
        raise DomainError("gradient is singular where |t| = 1")
    slope = np.asarray(prp_loss_slope(t, p))
    return slope[..., None] * _margin_gradient(theta_aug, np.asarray(b, dtype=np.float64), t)


def classification_gradient(theta, x_signed, p: int = 1) -> np.ndarray:
    """Gradient of ``classification_loss`` where rows of ``x_signed`` are ``y * x_bar``."""
    theta = np.asarray(theta, dtype=np.float64)
    t = normalized_margin(theta, x_signed)
    if np.any(np.abs(t) >= 1.0):
        raise DomainError("gradient is singular where |t| = 1")
    slope = np.asarray(classification_loss_slope(t, p))
    return slope[..., None] * _margin_gradient(theta, np.asarray(x_signed, dtype=np.float64), t)


def exact_empirical_risk(theta, dataset, params: SurrogateParams = SurrogateParams()) -> RiskReport:
    """Mean surrogate loss over the whole dataset, computed exactly.

    For regression ``theta`` has ``d`` entries and is extended with -1;
    for classification it is the full ``d + 1`` vector including the bias
    weight. ``mean_squared_error`` is the plain least-squares error of the
    linear predictor on the data as given.
    """
    theta = np.asarray(theta, dtype=np.float64)
    X, y = dataset.X, dataset.y
    if len(y) == 0:
        raise InputError("empty dataset")
    if not np.all(np.isfinite(theta)):
        raise InputError("theta must be finite")
    pred = X @ theta
    mse = float(np.mean((y - pred) ** 2))
    if params.family == "regression":
        theta_aug = np.append(theta, -1.0)
        t = normalized_margin(theta_aug, np.column_stack([X, y]))
        losses = prp_loss(t, params.p)
    else:
        t = normalized_margin(theta, y[:, None] * X)
        losses = classification_loss(t, params.p)
    return RiskReport(float(np.mean(losses)), mse, np.asarray(t))
