"""Weighted-l1 (plus ridge) pseudo-likelihood fits for a single category.

The maximized criterion is::

    pseudo_loglik(theta) - lam * sum_{j<k} w[j, k] |theta[j, k]|
                         - lam2 * sum_{j<k} theta[j, k] ** 2

Each interaction is updated by a proximal Newton step built from the two
conditional logistic terms it enters, followed by step halving until the
true penalized objective does not decrease.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    BinaryDataset,
    DimensionError,
    PenaltySpec,
    check_theta,
    pseudo_loglik,
    pseudo_loglik_grad,
)

WEIGHT_CAP = 1e10
PROB_CLAMP = 1e-6


class SolverError(RuntimeError):
    """Raised when the coordinate descent hits a non-finite objective."""


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iters: int = 200
    tol: float = 1e-6
    max_newton_halvings: int = 20

    def __post_init__(self):
        if self.max_outer_iters < 1 or self.tol <= 0 or self.max_newton_halvings < 1:
            raise ValueError("solver options must all be positive")


@dataclass(frozen=True)
class FitResult:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    trace: tuple[float, ...] = ()


def soft_threshold(z: float, t: float) -> float:
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return float(np.sign(z) * max(abs(z) - t, 0.0))


def check_weights(weights, p: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (p, p):
        raise DimensionError(f"weights must be {p}x{p}, got {w.shape}")
    if not np.array_equal(w, w.T):
        raise ValueError("weights must be symmetric")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    return np.minimum(w, WEIGHT_CAP)


def clamped_means(values: np.ndarray) -> np.ndarray:
    """Column means kept inside ``[1e-6, 1 - 1e-6]``."""
    return np.clip(values.mean(axis=0), PROB_CLAMP, 1.0 - PROB_CLAMP)


def penalized_objective(data, theta, penalty: PenaltySpec, weights) -> float:
    theta = np.asarray(theta, dtype=float)
    iu = np.triu_indices(theta.shape[0], 1)
    value = pseudo_loglik(data, theta)
    value -= penalty.lam * np.sum(np.asarray(weights)[iu] * np.abs(theta[iu]))
    value -= penalty.lam2 * np.sum(theta[iu] ** 2)
    if penalty.penalize_main_effects:
        value -= penalty.lam * np.sum(np.abs(np.diag(theta)))
    return float(value)


def stationarity_gaps(data, theta, penalty: PenaltySpec, weights) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate subgradient violations of the weighted problem.

    Returns ``(offdiag, diag)``: ``offdiag`` is a symmetric matrix with zero
    diagonal, ``diag`` a length-p vector. Main-effect gaps use the clamped
    column means, so a constant column counts as stationary at its clamped
    logit.
    """
    values = data.values if isinstance(data, BinaryDataset) else np.asarray(data, dtype=float)
    theta = np.asarray(theta, dtype=float)
    grad = pseudo_loglik_grad(values, theta)
    bound = penalty.lam * np.asarray(weights, dtype=float)
    g = grad - 2.0 * penalty.lam2 * theta
    gap = np.where(
        theta != 0,
        np.abs(g - bound * np.sign(theta)),
        np.maximum(np.abs(g) - bound, 0.0),
    )
    np.fill_diagonal(gap, 0.0)
    dgrad = np.diag(grad) + clamped_means(values) - values.mean(axis=0)
    if penalty.penalize_main_effects:
        d = np.diag(theta)
        dgap = np.where(d != 0, np.abs(dgrad - penalty.lam * np.sign(d)),
                        np.maximum(np.abs(dgrad) - penalty.lam, 0.0))
    else:
        dgap = np.abs(dgrad)
    return gap, dgap


def kkt_residual(data, theta, penalty: PenaltySpec, weights) -> float:
    gap, dgap = stationarity_gaps(data, theta, penalty, weights)
    return float(max(gap.max(initial=0.0), dgap.max(initial=0.0)))


def fit_weighted(
    data: BinaryDataset,
    penalty: PenaltySpec,
    weights=None,
    init=None,
    opts: SolverOptions | None = None,
) -> FitResult:
    """Maximize the weighted-l1/ridge penalized pseudo-likelihood.

    Parameters
    ----------
    data : BinaryDataset
    penalty : PenaltySpec
        ``lam`` multiplies ``weights``; ``lam2`` is the ridge weight.
    weights : array, optional
        Symmetric nonnegative per-edge multipliers (diagonal ignored).
        Defaults to all ones, i.e. the plain l1 (separate) estimator.
    init : array, optional
        Symmetric warm start; zeros by default.
    opts : SolverOptions, optional

    Returns
    -------
    FitResult
    """
    opts = opts or SolverOptions()
    p = data.p
    if weights is None:
        weights = np.ones((p, p))
    w = check_weights(weights, p)
    theta = np.zeros((p, p)) if init is None else check_theta(init, p).copy()

    X = np.ascontiguousarray(data.values, dtype=float)
    pen = penalty.lam * w
    np.fill_diagonal(pen, 0.0)
    diag_pen = np.full(p, penalty.lam if penalty.penalize_main_effects else 0.0)
    trace = np.full(opts.max_outer_iters, np.nan)
    iters, converged, status = _kernels.coordinate_descent(
        X, theta, pen, float(penalty.lam2), clamped_means(X), diag_pen,
        opts.max_outer_iters, float(opts.tol), opts.max_newton_halvings, trace,
    )
    if status == _kernels.STATUS_NONFINITE:
        raise SolverError(f"non-finite objective at iteration {iters}")

    return FitResult(
        theta=theta,
        objective=penalized_objective(X, theta, penalty, w),
        iterations=int(iters),
        converged=bool(converged),
        kkt_residual=kkt_residual(X, theta, penalty, w),
        trace=tuple(trace[:iters].tolist()),
    )
