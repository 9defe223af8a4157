"""Binary data containers and Ising pseudo-likelihood evaluation.

Parameter matrices are plain symmetric ``(p, p)`` float arrays. The
diagonal holds the main effects and the off-diagonal entries hold the
pairwise interactions. Observations are coded 0/1.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ENUMERATION_LIMIT = 20


class DimensionError(ValueError):
    """Raised when data and parameter dimensions disagree."""


def log1pexp(eta):
    """Stable ``log(1 + exp(eta))``."""
    eta = np.asarray(eta, dtype=float)
    return np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))


def sigmoid(eta):
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_binary(values: np.ndarray) -> None:
    if not np.all((values == 0) | (values == 1)):
        raise ValueError("binary data must contain only 0 and 1")


@dataclass(frozen=True)
class BinaryDataset:
    """An ``n x p`` matrix of 0/1 observations with named columns."""

    values: np.ndarray
    variable_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        n, p = values.shape
        if n < 1:
            raise ValueError("a dataset needs at least one observation")
        if p < 2:
            raise ValueError("a dataset needs at least two variables")
        _check_binary(values)
        names = tuple(self.variable_names) or tuple(f"X{j + 1}" for j in range(p))
        if len(names) != p:
            raise ValueError(f"expected {p} variable names, got {len(names)}")
        if len(set(names)) != p:
            raise ValueError("variable names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def subset(self, rows) -> "BinaryDataset":
        return BinaryDataset(self.values[np.asarray(rows)], self.variable_names)

    @classmethod
    def from_csv(cls, path) -> "BinaryDataset":
        """Read a header row of names followed by 0/1 rows."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty file") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ValueError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                parsed = []
                for tok in row:
                    tok = tok.strip()
                    if tok not in ("0", "1"):
                        raise ValueError(f"{path}:{lineno}: invalid token {tok!r}")
                    parsed.append(int(tok))
                rows.append(parsed)
        if not rows:
            raise ValueError(f"{path}: no observations")
        return cls(np.array(rows, dtype=float), tuple(h.strip() for h in header))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.variable_names)
            for row in self.values.astype(int):
                writer.writerow(row.tolist())


@dataclass(frozen=True)
class CategoryCollection:
    """K binary datasets over the same variables."""

    categories: tuple[BinaryDataset, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        cats = tuple(self.categories)
        if not cats:
            raise ValueError("a collection needs at least one category")
        labels = tuple(self.labels) or tuple(f"category{k + 1}" for k in range(len(cats)))
        if len(labels) != len(cats):
            raise ValueError("one label per category is required")
        names = cats[0].variable_names
        for k, cat in enumerate(cats[1:], start=1):
            if cat.variable_names != names:
                bad = _first_mismatch(names, cat.variable_names)
                raise DimensionError(
                    f"category {labels[k]!r} variables differ from {labels[0]!r} "
                    f"at column {bad}"
                )
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "labels", labels)

    @property
    def K(self) -> int:
        return len(self.categories)

    @property
    def p(self) -> int:
        return self.categories[0].p

    @property
    def variable_names(self) -> tuple[str, ...]:
        return self.categories[0].variable_names

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(c.n for c in self.categories)

    def __iter__(self):
        return iter(self.categories)

    def __getitem__(self, k) -> BinaryDataset:
        return self.categories[k]


def _first_mismatch(a: Sequence[str], b: Sequence[str]) -> str:
    for x, y in itertools.zip_longest(a, b, fillvalue="<missing>"):
        if x != y:
            return f"{y!r} (expected {x!r})"
    return "<none>"


@dataclass(frozen=True)
class PenaltySpec:
    """Tuning parameters: group/l1 weight ``lam`` and ridge weight ``lam2``.

    The ridge term acts on interactions only; main effects are never
    penalized unless ``penalize_main_effects`` is set (weighted l1 only).
    """

    lam: float = 0.0
    lam2: float = 0.0
    penalize_main_effects: bool = False

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ValueError(f"lam must be a finite nonnegative number, got {self.lam}")
        if not (self.lam2 >= 0 and np.isfinite(self.lam2)):
            raise ValueError(f"lam2 must be a finite nonnegative number, got {self.lam2}")


def check_theta(theta, p: int | None = None) -> np.ndarray:
    """Validate a parameter matrix and return it as a float array."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise DimensionError(f"theta must be square, got shape {theta.shape}")
    if p is not None and theta.shape[0] != p:
        raise DimensionError(f"theta is {theta.shape[0]}x{theta.shape[0]} but data has p={p}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta contains non-finite entries")
    if not np.array_equal(theta, theta.T):
        raise ValueError("theta must be exactly symmetric")
    return theta


def _values(data) -> np.ndarray:
    if isinstance(data, BinaryDataset):
        return data.values
    values = np.atleast_2d(np.asarray(data, dtype=float))
    _check_binary(values)
    return values


def linear_predictors(values: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``eta[i, j] = theta[j, j] + sum_{j' != j} theta[j, j'] x[i, j']``."""
    diag = np.diag(theta)
    return values @ (theta - np.diag(diag)) + diag


def conditional_logit(theta, x, j: int) -> float:
    theta = check_theta(theta)
    x = np.asarray(x, dtype=float)
    p = theta.shape[0]
    if x.shape != (p,):
        raise DimensionError(f"x must have length {p}")
    _check_binary(x)
    if not 0 <= j < p:
        raise IndexError(f"variable index {j} out of range for p={p}")
    mask = np.arange(p) != j
    return float(theta[j, j] + theta[j, mask] @ x[mask])


def pseudo_loglik(data, theta) -> float:
    """Average log pseudo-likelihood of ``data`` under ``theta``."""
    values = _values(data)
    theta = check_theta(theta, values.shape[1])
    eta = linear_predictors(values, theta)
    return float(np.sum(values * eta - log1pexp(eta)) / values.shape[0])


def pseudo_loglik_grad(data, theta) -> np.ndarray:
    """Gradient of :func:`pseudo_loglik` with one free parameter per pair.

    Off-diagonal entry ``(j, k)`` is the derivative with respect to the
    shared value ``theta[j, k] = theta[k, j]``.
    """
    values = _values(data)
    theta = check_theta(theta, values.shape[1])
    n = values.shape[0]
    prob = sigmoid(linear_predictors(values, theta))
    cross = values.T @ values
    mixed = prob.T @ values
    grad = (2.0 * cross - mixed - mixed.T) / n
    # BLAS products need not be bit-symmetric
    grad = 0.5 * (grad + grad.T)
    np.fill_diagonal(grad, np.mean(values - prob, axis=0))
    return grad


def all_states(p: int) -> np.ndarray:
    """Every binary vector of length ``p``, one per row."""
    if p > ENUMERATION_LIMIT:
        raise ValueError(f"p={p} exceeds the enumeration limit of {ENUMERATION_LIMIT}")
    codes = np.arange(2**p)
    return ((codes[:, None] >> np.arange(p)[None, :]) & 1).astype(float)


def state_scores(states: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Unnormalized log-probabilities of the rows of ``states``."""
    upper = np.triu(theta, 1)
    return states @ np.diag(theta) + np.einsum("ij,jk,ik->i", states, upper, states)


def log_partition(theta) -> float:
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    if p > ENUMERATION_LIMIT:
        raise ValueError(
            f"p={p} exceeds the enumeration limit of {ENUMERATION_LIMIT} variables"
        )
    scores = state_scores(all_states(p), theta)
    top = scores.max()
    return float(top + np.log(np.sum(np.exp(scores - top))))


def exact_loglik(data, theta) -> float:
    """Average exact log-likelihood, normalizing by enumeration (p <= 20)."""
    values = np.atleast_2d(np.asarray(data.values if isinstance(data, BinaryDataset) else data, dtype=float))
    _check_binary(values)
    theta = check_theta(theta, values.shape[1])
    if theta.shape[0] > ENUMERATION_LIMIT:
        raise ValueError(
            f"p={theta.shape[0]} exceeds the enumeration limit of {ENUMERATION_LIMIT} variables"
        )
    return float(np.mean(state_scores(values, theta)) - log_partition(theta))


def state_probabilities(theta) -> np.ndarray:
    """Exact pmf over :func:`all_states` ordering."""
    theta = check_theta(theta)
    scores = state_scores(all_states(theta.shape[0]), theta)
    w = np.exp(scores - scores.max())
    return w / w.sum()
