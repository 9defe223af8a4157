"""Tuning by D-fold cross-validation and edge selection by bootstrap."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import CategoryCollection, PenaltySpec, pseudo_loglik, pseudo_loglik_grad
from .joint import fit_joint, fit_path
from .solver import SolverOptions, fit_weighted
from .synthetic import EdgeSet, rng_for

log = logging.getLogger(__name__)


def _map(fn: Callable, jobs: Sequence, n_jobs: int) -> list:
    # results come back in job order, so parallel runs match serial ones
    if n_jobs <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


@dataclass(frozen=True)
class CvResult:
    lambda_grid: tuple[float, ...]
    scores: tuple[float, ...]
    best_lambda: float
    fold_assignments: tuple[np.ndarray, ...]
    D: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "lambda_grid": list(self.lambda_grid),
            "scores": list(self.scores),
            "best_lambda": self.best_lambda,
            "D": self.D,
            "seed": self.seed,
            "fold_assignments": [f.tolist() for f in self.fold_assignments],
        }


def assign_folds(n: int, D: int, rng: np.random.Generator) -> np.ndarray:
    """Random fold labels 0..D-1 whose counts differ by at most one."""
    folds = np.empty(n, dtype=int)
    folds[rng.permutation(n)] = np.arange(n) % D
    return folds


def separate_lambda_max(collection: CategoryCollection, lam2: float = 0.0) -> float:
    """Smallest l1 weight at which every separate fit has no interactions."""
    top = 0.0
    for data in collection:
        fit = fit_weighted(data, PenaltySpec(1e6, lam2))
        grad = pseudo_loglik_grad(data.values, fit.theta)
        np.fill_diagonal(grad, 0.0)
        top = max(top, float(np.abs(grad).max()))
    return top


def lambda_max(collection: CategoryCollection, lam2: float = 0.0,
               opts: SolverOptions | None = None, rtol: float = 1e-3) -> float:
    """Smallest lambda whose joint fit has no interactions, by bisection."""
    hi = separate_lambda_max(collection, lam2) * 1.0001
    if hi == 0.0:
        return 0.0
    lo = 0.0

    def empty(lam):
        return not fit_joint(collection, PenaltySpec(lam, lam2), opts).edge_mask().any()

    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if empty(mid):
            hi = mid
        else:
            lo = mid
    return hi


def default_grid(collection: CategoryCollection, lam2: float = 0.0, size: int = 20,
                 ratio: float = 0.01, opts: SolverOptions | None = None) -> np.ndarray:
    """``size`` log-spaced values from ``lambda_max`` down to ``ratio * lambda_max``."""
    top = lambda_max(collection, lam2, opts)
    return np.geomspace(top, ratio * top, size)


def _cv_fold(args):
    collection, folds, d, grid, lam2, opts = args
    train = CategoryCollection(
        tuple(c.subset(f != d) for c, f in zip(collection, folds)), collection.labels
    )
    test = [c.values[f == d] for c, f in zip(collection, folds)]
    scores = []
    for _, model in fit_path(train, grid, lam2, "joint", opts):
        scores.append(sum(pseudo_loglik(x, t) for x, t in zip(test, model.thetas)))
    return scores


def cross_validate(
    collection: CategoryCollection,
    lambda_grid: Sequence[float],
    D: int = 5,
    lam2: float = 0.0,
    seed: int = 0,
    opts: SolverOptions | None = None,
    n_jobs: int = 1,
) -> CvResult:
    """Pick lambda by the held-out pseudo-likelihood averaged over D folds.

    Folds are drawn independently in each category; fold ``d`` holds out
    the union of every category's ``d``-th subset. Ties go to the larger
    lambda.
    """
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if D < 2:
        raise ValueError("need at least two folds")
    for label, data in zip(collection.labels, collection):
        if data.n < D:
            raise ValueError(f"category {label!r} has {data.n} observations, fewer than D={D}")
    folds = tuple(
        assign_folds(data.n, D, rng_for(seed, "cv-folds", k)) for k, data in enumerate(collection)
    )
    jobs = [(collection, folds, d, grid, lam2, opts) for d in range(D)]
    per_fold = np.array(_map(_cv_fold, jobs, n_jobs))
    scores = per_fold.mean(axis=0)
    order = sorted(range(len(grid)), key=lambda i: (-scores[i], -grid[i]))
    return CvResult(
        lambda_grid=tuple(grid),
        scores=tuple(float(s) for s in scores),
        best_lambda=grid[order[0]],
        fold_assignments=folds,
        D=D,
        seed=seed,
    )


@dataclass(frozen=True)
class StabilityReport:
    B: int
    alpha: float
    lam: float
    lam2: float
    frequency: np.ndarray
    """``(K, p, p)`` selection frequencies, multiples of 1/B."""
    signs: np.ndarray
    """``(K, p, p)`` median sign over the replicates that selected the edge."""
    magnitudes: np.ndarray
    """``(K, p, p)`` mean |theta| over the replicates that selected the edge."""
    labels: tuple[str, ...]
    variable_names: tuple[str, ...]
    seed: int

    def stable_graphs(self, alpha: float | None = None) -> list[EdgeSet]:
        """Edges selected strictly more often than ``alpha``."""
        alpha = self.alpha if alpha is None else alpha
        return [EdgeSet.from_adjacency(f > alpha) for f in self.frequency]

    def signed_values(self) -> np.ndarray:
        return self.signs * self.magnitudes

    def to_dict(self) -> dict:
        cats = []
        for k, (label, g) in enumerate(zip(self.labels, self.stable_graphs())):
            cats.append({
                "label": label,
                "frequency": self.frequency[k].tolist(),
                "stable_edges": [
                    {
                        "nodes": [int(a), int(b)],
                        "names": [self.variable_names[a], self.variable_names[b]],
                        "frequency": float(self.frequency[k, a, b]),
                        "sign": int(self.signs[k, a, b]),
                        "mean_magnitude": float(self.magnitudes[k, a, b]),
                    }
                    for a, b in g
                ],
            })
        return {
            "B": self.B,
            "alpha": self.alpha,
            "lambda": self.lam,
            "lambda2": self.lam2,
            "seed": self.seed,
            "categories": cats,
        }


def _bootstrap_fit(args):
    collection, lam, lam2, seed, b, opts = args
    rng = rng_for(seed, "bootstrap", b)
    boot = CategoryCollection(
        tuple(c.subset(rng.integers(0, c.n, c.n)) for c in collection), collection.labels
    )
    try:
        return np.asarray(fit_joint(boot, PenaltySpec(lam, lam2), opts).thetas)
    except Exception as exc:
        raise RuntimeError(f"bootstrap replicate {b}: {exc}") from exc


def stability_select(
    collection: CategoryCollection,
    lam: float,
    lam2: float = 0.0,
    B: int = 100,
    alpha: float = 0.4,
    seed: int = 0,
    opts: SolverOptions | None = None,
    n_jobs: int = 1,
) -> StabilityReport:
    """Refit on B bootstrap resamples and record how often each edge appears.

    Every category is resampled with replacement to its own size. To keep
    only edges present in all replicates use ``alpha = 1 - 1 / (2 B)``,
    since the cutoff comparison is strict.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    jobs = [(collection, lam, lam2, seed, b, opts) for b in range(B)]
    thetas = np.array(_map(_bootstrap_fit, jobs, n_jobs))  # (B, K, p, p)
    selected = thetas != 0
    idx = np.arange(collection.p)
    selected[:, :, idx, idx] = False
    counts = selected.sum(axis=0)
    freq = counts / B
    sgn = np.where(selected, np.sign(thetas), np.nan)
    mag = np.where(selected, np.abs(thetas), np.nan)
    with warnings.catch_warnings():
        # all-NaN slices are edges never selected
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nan_to_num(np.sign(np.nanmedian(sgn, axis=0)))
        mean_mag = np.nan_to_num(np.nanmean(mag, axis=0))
    return StabilityReport(
        B=B,
        alpha=alpha,
        lam=float(lam),
        lam2=float(lam2),
        frequency=freq,
        signs=med,
        magnitudes=mean_mag,
        labels=collection.labels,
        variable_names=collection.variable_names,
        seed=seed,
    )
