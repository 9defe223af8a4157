"""Compiled inner loops: coordinate descent sweeps and Gibbs scans."""

import math

import numpy as np
from numba import njit

CURVATURE_FLOOR = 1e-4
DIAG_CURVATURE_FLOOR = 1e-12
DIAG_NEWTON_STEPS = 25

STATUS_OK = 0
STATUS_NONFINITE = 1


@njit(cache=True)
def _sp(eta):
    # log(1 + exp(eta)) without overflow
    if eta > 0:
        return eta + math.log1p(math.exp(-eta))
    return math.log1p(math.exp(eta))


@njit(cache=True)
def _sig(eta):
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


@njit(cache=True)
def objective(X, theta, eta, pen, lam2, diag_pen):
    n, p = X.shape
    total = 0.0
    for j in range(p):
        for i in range(n):
            total += X[i, j] * eta[i, j] - _sp(eta[i, j])
    total /= n
    for j in range(p):
        total -= diag_pen[j] * abs(theta[j, j])
        for k in range(j + 1, p):
            t = theta[j, k]
            total -= pen[j, k] * abs(t) + lam2 * t * t
    return total


@njit(cache=True)
def compute_eta(X, theta):
    n, p = X.shape
    eta = np.empty((n, p))
    for i in range(n):
        for j in range(p):
            s = theta[j, j]
            for k in range(p):
                if k != j and X[i, k] != 0.0:
                    s += theta[j, k]
            eta[i, j] = s
    return eta


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _column_rows(X):
    """CSR-style lists of the rows where each column equals 1."""
    n, p = X.shape
    ptr = np.zeros(p + 1, dtype=np.int64)
    for j in range(p):
        c = 0
        for i in range(n):
            if X[i, j] != 0.0:
                c += 1
        ptr[j + 1] = ptr[j] + c
    idx = np.empty(ptr[p], dtype=np.int64)
    for j in range(p):
        c = ptr[j]
        for i in range(n):
            if X[i, j] != 0.0:
                idx[c] = i
                c += 1
    return ptr, idx


@njit(cache=True)
def _refresh(eta, sig, sp, i, j):
    e = eta[i, j]
    if e > 0:
        z = math.exp(-e)
        sig[i, j] = 1.0 / (1.0 + z)
        sp[i, j] = e + math.log1p(z)
    else:
        z = math.exp(e)
        sig[i, j] = z / (1.0 + z)
        sp[i, j] = math.log1p(z)


@njit(cache=True)
def _sp_sig(e):
    # softplus and logistic sharing one exp
    if e > 0:
        z = math.exp(-e)
        return e + math.log1p(z), 1.0 / (1.0 + z)
    z = math.exp(e)
    return math.log1p(z), z / (1.0 + z)


@njit(cache=True)
def _update_diag(theta, eta, sig, sp, j, target, dpen, max_halvings, tol, buf_sp, buf_sig):
    """Safeguarded Newton iterations on one main effect; returns |change|."""
    n = eta.shape[0]
    start = theta[j, j]
    for _ in range(DIAG_NEWTON_STEPS):
        t = theta[j, j]
        g = 0.0
        h = 0.0
        for i in range(n):
            s = sig[i, j]
            g -= s
            h += s * (1.0 - s)
        g = target + g / n
        h = max(h / n, DIAG_CURVATURE_FLOOR)
        if dpen > 0.0:
            u = _soft(h * t + g, dpen) / h
        else:
            u = t + g / h
        delta = u - t
        if delta == 0.0:
            break
        a = 1.0
        accepted = False
        step = 0.0
        for _h in range(max_halvings + 1):
            step = a * delta
            loss = 0.0
            for i in range(n):
                v, w = _sp_sig(eta[i, j] + step)
                buf_sp[i] = v
                buf_sig[i] = w
                loss += v - sp[i, j]
            gain = target * step - loss / n - dpen * (abs(t + step) - abs(t))
            if gain >= 0.0:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            break
        theta[j, j] = t + step
        for i in range(n):
            eta[i, j] += step
            sp[i, j] = buf_sp[i]
            sig[i, j] = buf_sig[i]
        if abs(step) < tol * 1e-2:
            break
    return abs(theta[j, j] - start)


@njit(cache=True)
def _update_edge(theta, eta, sig, sp, cross, ptr, idx, j, k, n, pen, lam2, max_halvings, buf_sp, buf_sig):
    """Proximal Newton step on the shared interaction (j, k); returns |change|.

    Only rows with x_k = 1 move eta[:, j] and only rows with x_j = 1 move
    eta[:, k], so both sums run over those rows alone.
    """
    t = theta[j, k]
    g = 2.0 * cross
    h = 0.0
    for q in range(ptr[k], ptr[k + 1]):
        s = sig[idx[q], j]
        g -= s
        h += s * (1.0 - s)
    for q in range(ptr[j], ptr[j + 1]):
        s = sig[idx[q], k]
        g -= s
        h += s * (1.0 - s)
    g /= n
    h = max(h / n, CURVATURE_FLOOR)
    u = _soft(h * t + g, pen) / (h + 2.0 * lam2)
    delta = u - t
    if delta == 0.0:
        return 0.0
    a = 1.0
    nk = ptr[k + 1] - ptr[k]
    for _h in range(max_halvings + 1):
        step = a * delta
        loss = 0.0
        b = 0
        for q in range(ptr[k], ptr[k + 1]):
            i = idx[q]
            v, w = _sp_sig(eta[i, j] + step)
            buf_sp[b] = v
            buf_sig[b] = w
            b += 1
            loss += v - sp[i, j]
        for q in range(ptr[j], ptr[j + 1]):
            i = idx[q]
            v, w = _sp_sig(eta[i, k] + step)
            buf_sp[b] = v
            buf_sig[b] = w
            b += 1
            loss += v - sp[i, k]
        new = t + step
        gain = (2.0 * cross * step - loss) / n - pen * (abs(new) - abs(t)) - lam2 * (new * new - t * t)
        if gain >= 0.0:
            theta[j, k] = new
            theta[k, j] = new
            b = 0
            for q in range(ptr[k], ptr[k + 1]):
                i = idx[q]
                eta[i, j] += step
                sp[i, j] = buf_sp[b]
                sig[i, j] = buf_sig[b]
                b += 1
            for q in range(ptr[j], ptr[j + 1]):
                i = idx[q]
                eta[i, k] += step
                sp[i, k] = buf_sp[b]
                sig[i, k] = buf_sig[b]
                b += 1
            return abs(step)
        a *= 0.5
    return 0.0


@njit(cache=True)
def _sweep(theta, eta, sig, sp, cross, ptr, idx, n, pen, lam2, diag_target, diag_pen,
           max_halvings, tol, active_only):
    p = theta.shape[0]
    change = 0.0
    buf_sp = np.empty(2 * n)
    buf_sig = np.empty(2 * n)
    for j in range(p):
        d = _update_diag(theta, eta, sig, sp, j, diag_target[j], diag_pen[j], max_halvings, tol,
                         buf_sp, buf_sig)
        change = max(change, d)
    for j in range(p):
        for k in range(j + 1, p):
            if active_only and theta[j, k] == 0.0:
                continue
            d = _update_edge(theta, eta, sig, sp, cross[j, k], ptr, idx, j, k, n,
                             pen[j, k], lam2, max_halvings, buf_sp, buf_sig)
            change = max(change, d)
    return change


@njit(cache=True)
def coordinate_descent(X, theta, pen, lam2, diag_target, diag_pen, max_sweeps, tol, max_halvings, trace):
    """Maximize the penalized pseudo-likelihood in place.

    ``trace`` receives the objective after every full sweep. Returns
    (full sweeps done, converged flag, status code).
    """
    n, p = X.shape
    eta = compute_eta(X, theta)
    sig = np.empty((n, p))
    sp = np.empty((n, p))
    for i in range(n):
        for j in range(p):
            _refresh(eta, sig, sp, i, j)
    ptr, idx = _column_rows(X)
    cross = X.T @ X
    prev = objective(X, theta, eta, pen, lam2, diag_pen)
    if not math.isfinite(prev):
        return 0, False, STATUS_NONFINITE
    for it in range(max_sweeps):
        change = _sweep(theta, eta, sig, sp, cross, ptr, idx, n, pen, lam2, diag_target,
                        diag_pen, max_halvings, tol, False)
        obj = objective(X, theta, eta, pen, lam2, diag_pen)
        trace[it] = obj
        if not math.isfinite(obj):
            return it + 1, False, STATUS_NONFINITE
        if change < tol:
            return it + 1, True, STATUS_OK
        # polish the active set before the next full pass
        for _ in range(max_sweeps):
            c = _sweep(theta, eta, sig, sp, cross, ptr, idx, n, pen, lam2, diag_target,
                       diag_pen, max_halvings, tol, True)
            if c < tol:
                break
    return max_sweeps, False, STATUS_OK


@njit(cache=True)
def gibbs_scan(theta, state, uniforms, thin, out, start_row):
    """Systematic-scan Gibbs rounds driven by pre-drawn uniforms.

    Round r updates j = 0..p-1 in order. With ``thin > 0`` the state after
    every ``thin``-th round is written to ``out`` starting at ``start_row``;
    returns the next free row. ``thin == 0`` records nothing (burn-in).
    """
    rounds, p = uniforms.shape
    row = start_row
    for r in range(rounds):
        for j in range(p):
            s = theta[j, j]
            for k in range(p):
                if k != j and state[k] != 0.0:
                    s += theta[j, k]
            state[j] = 1.0 if uniforms[r, j] < _sig(s) else 0.0
        if thin > 0 and (r + 1) % thin == 0:
            for j in range(p):
                out[row, j] = state[j]
            row += 1
    return row
