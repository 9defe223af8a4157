"""Independent reference computations used by the tests."""

import numpy as np
from scipy.optimize import minimize

from jointising.core import pseudo_loglik, pseudo_loglik_grad


def _unpack(vec, p):
    theta = np.zeros((p, p))
    theta[np.triu_indices(p)] = vec
    return theta + np.triu(theta, 1).T


def lbfgs_fit(x, lam=0.0, lam2=0.0, weights=None):
    """Maximize the weighted-l1/ridge criterion with L-BFGS-B.

    The l1 term is made smooth by splitting each interaction into a
    positive and a negative part, both bounded below by zero.
    """
    x = np.asarray(x, dtype=float)
    p = x.shape[1]
    iu = np.triu_indices(p)
    off = iu[0] != iu[1]
    w = np.ones((p, p)) if weights is None else np.asarray(weights, float)
    pen = lam * w[iu] * off
    m = len(iu[0])

    def f(z):
        pos, neg = z[:m], z[m:]
        theta = _unpack(pos - neg, p)
        val = -pseudo_loglik(x, theta) + pen @ (pos + neg) + lam2 * np.sum(((pos - neg) * off) ** 2)
        g = -pseudo_loglik_grad(x, theta)[iu] + 2 * lam2 * (pos - neg) * off
        return val, np.concatenate([g + pen, -g + pen])

    bounds = [(0, None)] * (2 * m)
    res = minimize(f, np.zeros(2 * m), jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 30})
    theta = _unpack(res.x[:m] - res.x[m:], p)
    return theta, -res.fun
