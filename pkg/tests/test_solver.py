import logging
import math

import numpy as np
import pytest

from jointising.core import BinaryDataset, DimensionError, PenaltySpec
from jointising.solver import (
    WEIGHT_CAP,
    SolverOptions,
    check_weights,
    fit_weighted,
    penalized_objective,
    soft_threshold,
    stationarity_gaps,
)
from jointising.synthetic import exact_sample, sample_params, gen_chain

from conftest import random_data, random_theta
from oracles import lbfgs_fit

log = logging.getLogger(__name__)


def chain_data(p, n, seed):
    return exact_sample(sample_params(gen_chain(p), seed), n, seed=seed + 1)


@pytest.mark.parametrize("z,t,expected", [(3, 1, 2), (-0.5, 1, 0), (-3, 2, -1), (0.0, 0.0, 0.0)])
def test_soft_threshold(z, t, expected):
    assert soft_threshold(z, t) == expected


def test_soft_threshold_negative_threshold():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol=0)
    with pytest.raises(ValueError):
        SolverOptions(max_outer_iters=0)


def test_huge_lambda_gives_intercept_model():
    x = np.zeros((8, 3))
    x[:6, 0] = 1  # 75% ones
    x[::2, 1] = 1
    x[1, 2] = 1
    fit = fit_weighted(BinaryDataset(x), PenaltySpec(1e6))
    off = fit.theta - np.diag(np.diag(fit.theta))
    assert not off.any()
    assert fit.theta[0, 0] == pytest.approx(math.log(3), abs=1e-6)
    assert fit.theta[1, 1] == pytest.approx(0.0, abs=1e-6)
    assert fit.theta[2, 2] == pytest.approx(math.log(1 / 7), abs=1e-6)


def test_constant_columns_use_clamped_logit():
    x = np.zeros((10, 3))
    x[:, 1] = 1
    x[::3, 2] = 1
    fit = fit_weighted(BinaryDataset(x), PenaltySpec(0.1))
    logit = math.log(1e-6 / (1 - 1e-6))
    assert np.all(np.isfinite(fit.theta))
    assert fit.theta[0, 0] == pytest.approx(logit, abs=1e-6)
    assert fit.theta[1, 1] == pytest.approx(-logit, abs=1e-6)


def test_unpenalized_matches_generic_optimizer():
    data = chain_data(4, 200, 3)
    fit = fit_weighted(data, PenaltySpec(0.0), weights=np.zeros((4, 4)))
    _, best = lbfgs_fit(data.values)
    assert abs(fit.objective - best) < 1e-6
    assert fit.objective >= best - 1e-9


def test_l1_fit_ascends_from_init_and_is_stationary(rng):
    data = random_data(rng, 150, 5, prob=0.4)
    init = random_theta(rng, 5, 0.3)
    pen = PenaltySpec(0.2)
    fit = fit_weighted(data, pen, init=init)
    assert fit.objective >= penalized_objective(data, init, pen, np.ones((5, 5)))
    assert fit.kkt_residual < 1e-4
    assert fit.converged


def test_stationarity_postcondition(rng):
    data = chain_data(6, 300, 8)
    w = rng.uniform(0.5, 2.0, (6, 6))
    w = (w + w.T) / 2
    opts = SolverOptions(tol=1e-7)
    pen = PenaltySpec(0.05, 0.01)
    fit = fit_weighted(data, pen, w, opts=opts)
    gap, dgap = stationarity_gaps(data, fit.theta, pen, w)
    assert gap.max() <= 10 * opts.tol
    assert dgap.max() <= 10 * opts.tol


def test_objective_field_matches_criterion(rng):
    data = random_data(rng, 40, 5)
    pen = PenaltySpec(0.07, 0.02)
    fit = fit_weighted(data, pen)
    assert abs(fit.objective - penalized_objective(data, fit.theta, pen, np.ones((5, 5)))) < 1e-10


def test_monotone_trace_and_symmetry(rng):
    data = chain_data(8, 120, 5)
    fit = fit_weighted(data, PenaltySpec(0.03), init=random_theta(rng, 8, 0.4))
    assert np.all(np.diff(fit.trace) >= -1e-10)
    assert np.array_equal(fit.theta, fit.theta.T)


def test_ridge_only_fit_is_dense_and_finite():
    x = np.zeros((6, 4))
    x[:3, 0] = x[:3, 1] = 1  # perfectly aligned columns: unpenalized MLE diverges
    x[::2, 2] = 1
    x[1:4, 3] = 1
    fit = fit_weighted(BinaryDataset(x), PenaltySpec(0.0, 0.01))
    off = fit.theta[np.triu_indices(4, 1)]
    assert np.all(np.isfinite(fit.theta))
    assert np.all(off != 0)
    assert np.array_equal(fit.theta, fit.theta.T)


def test_sparsity_along_lambda_grid():
    data = chain_data(6, 200, 11)
    counts = []
    for lam in (0.3, 0.1, 0.05, 0.02, 0.01):
        fit = fit_weighted(data, PenaltySpec(lam))
        counts.append(int(np.count_nonzero(np.triu(fit.theta, 1))))
    if any(a > b for a, b in zip(counts, counts[1:])):
        log.warning("nonzero counts not nested along the grid: %s", counts)
    assert np.count_nonzero(np.triu(fit_weighted(data, PenaltySpec(1e6)).theta, 1)) == 0


def test_weights_validation():
    with pytest.raises(DimensionError):
        check_weights(np.ones((3, 3)), 4)
    with pytest.raises(ValueError):
        check_weights(-np.ones((2, 2)), 2)
    w = np.array([[0.0, 1e12], [1e12, 0.0]])
    assert check_weights(w, 2)[0, 1] == WEIGHT_CAP


def test_init_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        fit_weighted(random_data(rng, 5, 3), PenaltySpec(0.1), init=np.zeros((4, 4)))


def test_weighted_l1_matches_generic_optimizer(rng):
    data = chain_data(5, 200, 21)
    w = rng.uniform(0.5, 3.0, (5, 5))
    w = (w + w.T) / 2
    fit = fit_weighted(data, PenaltySpec(0.05), w)
    _, best = lbfgs_fit(data.values, 0.05, weights=w)
    assert fit.objective >= best - 1e-6
