"""Joint estimation of K Ising networks under the square-root group penalty.

The criterion is::

    sum_k pseudo_loglik_k(theta_k) - lam * sum_{j<l} sqrt(sum_k |theta_k[j, l]|)
                                   - lam2 * sum_k sum_{j<l} theta_k[j, l] ** 2

It is maximized by local linear approximation: the concave square root is
replaced by its tangent at the current estimates, which decouples the
problem into K weighted-l1 fits solved by :func:`fit_weighted`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    CategoryCollection,
    DimensionError,
    PenaltySpec,
    check_theta,
    pseudo_loglik,
    pseudo_loglik_grad,
)
from .solver import (
    WEIGHT_CAP,
    FitResult,
    SolverError,
    SolverOptions,
    fit_weighted,
    stationarity_gaps,
)

log = logging.getLogger(__name__)

GROUP_THRESHOLD = 1e-10
MAX_LLA_ITERS = 50


def _stack(thetas) -> np.ndarray:
    mats = [np.asarray(t, dtype=float) for t in thetas]
    if len({m.shape for m in mats}) > 1:
        raise DimensionError("expected K square matrices of matching size")
    arr = np.asarray(mats)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionError("expected K square matrices of matching size")
    return arr


def group_sums(thetas) -> np.ndarray:
    """``sum_k |theta_k|`` per entry (diagonal included, callers mask it)."""
    return np.abs(_stack(thetas)).sum(axis=0)


def group_penalty(thetas, lam: float) -> float:
    """``lam * sum_{j<l} sqrt(sum_k |theta_k[j, l]|)``."""
    s = group_sums(thetas)
    iu = np.triu_indices(s.shape[0], 1)
    return float(lam * np.sum(np.sqrt(s[iu])))


def lla_weights(thetas) -> np.ndarray:
    """Per-edge ``1 / max(sqrt(sum_k |theta_k|), 1e-10)``, capped at 1e10."""
    root = np.sqrt(group_sums(thetas))
    w = 1.0 / np.maximum(root, GROUP_THRESHOLD)
    np.fill_diagonal(w, 0.0)
    return np.minimum(w, WEIGHT_CAP)


def joint_objective(collection: CategoryCollection, thetas, penalty: PenaltySpec) -> float:
    thetas = _stack(thetas)
    iu = np.triu_indices(collection.p, 1)
    value = sum(pseudo_loglik(d, t) for d, t in zip(collection, thetas))
    value -= group_penalty(thetas, penalty.lam)
    value -= penalty.lam2 * sum(np.sum(t[iu] ** 2) for t in thetas)
    return float(value)


@dataclass(frozen=True)
class KKTReport:
    residuals: tuple[float, ...]
    violations: tuple[tuple[int, int, int, float], ...]
    """(category, j, l, gap) for every coordinate whose gap exceeds ``tol``;
    ``j == l`` marks a main effect."""

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)


@dataclass(frozen=True)
class JointModel:
    thetas: tuple[np.ndarray, ...]
    penalty: PenaltySpec
    lla_iterations: int
    objective_trace: tuple[float, ...]
    kkt_residuals: tuple[float, ...] = ()
    labels: tuple[str, ...] = ()
    variable_names: tuple[str, ...] = ()
    converged: bool = True
    seed: int | None = None

    @property
    def K(self) -> int:
        return len(self.thetas)

    @property
    def p(self) -> int:
        return self.thetas[0].shape[0]

    def edge_mask(self, threshold: float = 0.0) -> np.ndarray:
        """Boolean ``(K, p, p)`` array of selected interactions."""
        mask = np.abs(np.asarray(self.thetas)) > threshold
        for m in mask:
            np.fill_diagonal(m, False)
        return mask

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "K": self.K,
            "labels": list(self.labels),
            "variable_names": list(self.variable_names),
            "lambda": self.penalty.lam,
            "lambda2": self.penalty.lam2,
            "thetas": [[[_fmt(v) for v in row] for row in t] for t in self.thetas],
            "objective_trace": [_fmt(v) for v in self.objective_trace],
            "kkt_residuals": [_fmt(v) for v in self.kkt_residuals],
            "lla_iterations": self.lla_iterations,
            "converged": self.converged,
            "seed": self.seed,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "JointModel":
        thetas = tuple(np.array(t, dtype=float) for t in d["thetas"])
        if len(thetas) != d["K"] or any(t.shape != (d["p"], d["p"]) for t in thetas):
            raise DimensionError("model document dimensions are inconsistent")
        return cls(
            thetas=tuple(check_theta(t) for t in thetas),
            penalty=PenaltySpec(d["lambda"], d["lambda2"]),
            lla_iterations=d.get("lla_iterations", 0),
            objective_trace=tuple(d.get("objective_trace", ())),
            kkt_residuals=tuple(d.get("kkt_residuals", ())),
            labels=tuple(d.get("labels", ())),
            variable_names=tuple(d.get("variable_names", ())),
            converged=d.get("converged", True),
            seed=d.get("seed"),
        )

    @classmethod
    def load(cls, path) -> "JointModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _fmt(v: float) -> float:
    # 17 significant digits round-trips every double
    return float(f"{float(v):.17g}")


def _fit_all(collection, penalty, weights, inits, opts) -> list[FitResult]:
    fits = []
    for k, (data, init) in enumerate(zip(collection, inits)):
        try:
            fits.append(fit_weighted(data, penalty, weights, init, opts))
        except SolverError as exc:
            raise SolverError(f"category {k} ({collection.labels[k]}): {exc}") from exc
    return fits


def fit_separate(collection: CategoryCollection, penalty: PenaltySpec,
                 opts: SolverOptions | None = None, inits=None) -> JointModel:
    """Independent l1-penalized fits, one per category."""
    opts = opts or SolverOptions()
    p = collection.p
    inits = inits if inits is not None else [None] * collection.K
    fits = _fit_all(collection, penalty, np.ones((p, p)), inits, opts)
    return JointModel(
        thetas=tuple(f.theta for f in fits),
        penalty=penalty,
        lla_iterations=0,
        objective_trace=(sum(f.objective for f in fits),),
        kkt_residuals=tuple(f.kkt_residual for f in fits),
        labels=collection.labels,
        variable_names=collection.variable_names,
        converged=all(f.converged for f in fits),
    )


def fit_joint(
    collection: CategoryCollection,
    penalty: PenaltySpec,
    opts: SolverOptions | None = None,
    max_lla_iters: int = MAX_LLA_ITERS,
    init=None,
    kkt_tol: float = 1e-4,
) -> JointModel:
    """Fit all categories jointly.

    The separate l1 estimates at the same ``lam`` seed the iteration (or
    ``init`` if given). Each LLA step solves K weighted problems with
    per-edge multiplier ``lam / 2 * lla_weights``, warm-started at the
    current estimates, until the largest parameter change drops below
    ``opts.tol``, the joint KKT residual drops below ``kkt_tol / 100``, or
    ``max_lla_iters`` steps have run. ``max_lla_iters=0``
    returns the initializer unchanged.

    The factor 1/2 is the slope of the square root; dropping it gives the
    same estimates as this function at ``2 * lam``.
    """
    opts = opts or SolverOptions()
    if init is None:
        current = fit_separate(collection, penalty, opts).thetas
    else:
        current = tuple(check_theta(t, collection.p).copy() for t in init)
    current = np.asarray(current)
    trace = [joint_objective(collection, current, penalty)]

    converged = max_lla_iters == 0
    it = 0
    half = PenaltySpec(penalty.lam / 2.0, penalty.lam2, penalty.penalize_main_effects)
    change = np.inf
    for it in range(1, max_lla_iters + 1):
        w = lla_weights(current)
        # early subproblems need not be solved to full precision; every
        # warm-started solve still ascends the surrogate
        inner = replace(opts, tol=float(max(opts.tol, min(0.1 * change, 1e-3))))
        fits = _fit_all(collection, half, w, current, inner)
        new = np.asarray([f.theta for f in fits])
        change = float(np.max(np.abs(new - current)))
        current = new
        trace.append(joint_objective(collection, current, penalty))
        if trace[-1] < trace[-2] - 1e-8:
            log.warning("LLA objective decreased by %.3g at iteration %d", trace[-2] - trace[-1], it)
        # MM converges linearly, so also stop once the joint first-order
        # conditions hold well inside the reporting tolerance
        if (change < opts.tol
                or _kkt(collection, current, penalty, kkt_tol).max_residual < 0.01 * kkt_tol):
            converged = True
            break

    model = JointModel(
        thetas=tuple(current),
        penalty=penalty,
        lla_iterations=it,
        objective_trace=tuple(trace),
        labels=collection.labels,
        variable_names=collection.variable_names,
        converged=converged,
    )
    report = check_kkt(model, collection, kkt_tol)
    return replace(model, kkt_residuals=report.residuals)


def check_kkt(model: JointModel, collection: CategoryCollection, tol: float = 1e-4) -> KKTReport:
    """First-order conditions of the joint criterion at ``model``.

    For an interaction with group sum ``u = sum_k |theta_k| > 0`` the
    derivative of the square-root penalty is ``lam / (2 sqrt(u))``: active
    coordinates must match it with the sign of theta, inactive ones must
    stay within it. Groups with ``u == 0`` have an unbounded subgradient
    and are always satisfied. Ridge is absorbed into the gradient.
    """
    return _kkt(collection, np.asarray(model.thetas), model.penalty, tol)


def _kkt(collection, thetas, penalty: PenaltySpec, tol: float) -> KKTReport:
    lam, lam2 = penalty.lam, penalty.lam2
    root = np.sqrt(group_sums(thetas))
    with np.errstate(divide="ignore"):
        bound = np.where(root > 0, lam / (2.0 * root), np.inf)
    residuals, violations = [], []
    for k, (data, theta) in enumerate(zip(collection, thetas)):
        grad = pseudo_loglik_grad(data, theta)
        g = grad - 2.0 * lam2 * theta
        with np.errstate(invalid="ignore"):
            gap = np.where(
                theta != 0,
                np.abs(g - bound * np.sign(theta)),
                np.maximum(np.abs(g) - bound, 0.0),
            )
        _, dgap = stationarity_gaps(data, theta, penalty, np.ones_like(theta))
        np.fill_diagonal(gap, dgap)
        residuals.append(float(gap.max()))
        for j, l in zip(*np.nonzero(np.triu(gap) > tol)):
            violations.append((k, int(j), int(l), float(gap[j, l])))
    return KKTReport(tuple(residuals), tuple(violations))


@dataclass(frozen=True)
class FactorizationResult:
    phi: float
    gammas: np.ndarray
    eta1: float
    eta2: float

    @property
    def penalty_value(self) -> float:
        return float(self.eta1 * self.phi + self.eta2 * np.sum(np.abs(self.gammas)))


def factorize_penalty(theta_values, eta1: float, eta2: float) -> FactorizationResult:
    """Split one edge's K values into a common factor and individual factors.

    Minimizes ``eta1 * phi + eta2 * sum_k |gamma_k|`` subject to
    ``phi * gamma_k = theta_k`` and ``phi >= 0``. The minimum equals
    ``lam * sqrt(sum_k |theta_k|)`` with ``lam = 2 sqrt(eta1 eta2)``.
    """
    if not (eta1 > 0 and eta2 > 0):
        raise ValueError("eta1 and eta2 must be positive")
    theta = np.asarray(theta_values, dtype=float)
    total = np.sum(np.abs(theta))
    if total == 0:
        return FactorizationResult(0.0, np.zeros_like(theta), float(eta1), float(eta2))
    phi = float(np.sqrt(eta2 * total / eta1))
    return FactorizationResult(phi, theta / phi, float(eta1), float(eta2))


def lambda_from_etas(eta1: float, eta2: float) -> float:
    return float(2.0 * np.sqrt(eta1 * eta2))


def fit_path(
    collection: CategoryCollection,
    lambdas,
    lam2: float = 0.0,
    method: str = "joint",
    opts: SolverOptions | None = None,
    max_lla_iters: int = MAX_LLA_ITERS,
) -> list[tuple[float, JointModel]]:
    """Fit every value in ``lambdas``, returned in the order given.

    Distinct values are solved from largest to smallest; each separate fit
    warm-starts from the previous one, which only speeds up the convex
    l1 problem. For ``method="joint"`` that separate fit is then the LLA
    initializer, as in :func:`fit_joint`. Repeated values share
    one fit.
    """
    if method not in ("joint", "separate"):
        raise ValueError(f"method must be 'joint' or 'separate', got {method!r}")
    opts = opts or SolverOptions()
    fitted: dict[float, JointModel] = {}
    prev = None
    for lam in sorted({float(v) for v in lambdas}, reverse=True):
        penalty = PenaltySpec(lam, lam2)
        sep = fit_separate(collection, penalty, opts, inits=prev)
        prev = sep.thetas
        if method == "joint":
            fitted[lam] = fit_joint(collection, penalty, opts, max_lla_iters, init=sep.thetas)
        else:
            fitted[lam] = sep
    return [(float(v), fitted[float(v)]) for v in lambdas]
