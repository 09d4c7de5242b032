"""Compiled numerical kernels for the coordinate-descent solver.

Deliberately plain scalar-loop numba code with a fixed summation order:
results must be bit-reproducible across runs, so no fastmath, no parallel
sections, and the same loop order everywhere the same quantity appears.
In particular the weighted correlation in _lambda_max mirrors the inner
loop of _sweep term by term; that is what makes a fit at the top of the
penalty grid return an exactly zero coefficient vector.

Loss kinds are encoded as integers here: 0 student, 1 squared, 2 huber.
Weights are the effective ones (the student weight already carries the
scale factor c), which keeps the surrogate-descent argument exact for
any c.
"""

import numpy as np
from numba import njit

KIND_STUDENT = 0
KIND_SQUARED = 1
KIND_HUBER = 2


@njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def _weights(resid, nu, c, kind, delta):
    n = resid.shape[0]
    w = np.empty(n)
    if kind == 0:
        for i in range(n):
            w[i] = c * (nu + 1.0) / (nu + resid[i] * resid[i])
    elif kind == 1:
        for i in range(n):
            w[i] = 1.0
    else:
        for i in range(n):
            a = abs(resid[i])
            w[i] = 1.0 if a <= delta else delta / a
    return w


@njit(cache=True, nogil=True)
def _loss_value(resid, nu, c, kind, delta, n):
    acc = 0.0
    if kind == 0:
        for i in range(n):
            acc += np.log1p(resid[i] * resid[i] / nu)
        return c * (nu + 1.0) * acc / (2.0 * n)
    elif kind == 1:
        for i in range(n):
            acc += resid[i] * resid[i]
        return acc / (2.0 * n)
    else:
        for i in range(n):
            a = abs(resid[i])
            if a <= delta:
                acc += 0.5 * a * a
            else:
                acc += delta * a - 0.5 * delta * delta
        return acc / n


@njit(cache=True, nogil=True)
def _grad_true(XT, resid, nu, c, kind, delta):
    p, n = XT.shape
    g = np.empty(p)
    for j in range(p):
        acc = 0.0
        if kind == 0:
            for i in range(n):
                acc += resid[i] / (nu + resid[i] * resid[i]) * XT[j, i]
            g[j] = -c * (nu + 1.0) * acc / n
        elif kind == 1:
            for i in range(n):
                acc += resid[i] * XT[j, i]
            g[j] = -acc / n
        else:
            for i in range(n):
                r = resid[i]
                psi = r if abs(r) <= delta else delta * (1.0 if r > 0 else -1.0)
                acc += psi * XT[j, i]
            g[j] = -acc / n
    return g


@njit(cache=True, nogil=True)
def _kkt_gap(g, beta, lam):
    # stationarity gap of loss + lam*||beta||_1: subgradient slack at zeros,
    # exact-sign residual at nonzeros
    viol = 0.0
    for j in range(beta.shape[0]):
        if beta[j] == 0.0:
            v = abs(g[j]) - lam
            if v < 0.0:
                v = 0.0
        else:
            v = abs(g[j] + lam * (1.0 if beta[j] > 0.0 else -1.0))
        if v > viol:
            viol = v
    return viol


@njit(cache=True, nogil=True)
def _recompute_resid(XT, y, beta, b0, resid):
    p, n = XT.shape
    for i in range(n):
        resid[i] = y[i] - b0
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                resid[i] -= XT[j, i] * bj


@njit(cache=True, nogil=True)
def _sweep(XT, resid, beta, w, lam, full, active, unnormalized, use_icpt, b0):
    """One cyclic coordinate pass with fixed weights; mutates resid/beta/active.

    Returns (max coefficient change, new intercept, degenerate-column flag).
    """
    p, n = XT.shape
    max_change = 0.0
    degenerate = False
    if use_icpt:
        sw = 0.0
        sr = 0.0
        for i in range(n):
            sw += w[i]
            sr += w[i] * resid[i]
        d0 = sr / sw
        if d0 != 0.0:
            b0 += d0
            for i in range(n):
                resid[i] -= d0
        if abs(d0) > max_change:
            max_change = abs(d0)
    for j in range(p):
        if not (full or active[j]):
            continue
        bj = beta[j]
        zj = 0.0
        Aj = 0.0
        for i in range(n):
            xij = XT[j, i]
            Aj += w[i] * xij * xij
            zj += w[i] * xij * (resid[i] + xij * bj)
        if Aj <= 0.0:
            new = 0.0
            if zj != 0.0:
                degenerate = True
        elif unnormalized:
            new = _soft(zj, lam) / Aj
        else:
            new = _soft(zj / n, lam) * n / Aj
        d = new - bj
        if d != 0.0:
            beta[j] = new
            for i in range(n):
                resid[i] -= XT[j, i] * d
        ad = abs(d)
        if ad > max_change:
            max_change = ad
        active[j] = beta[j] != 0.0
    return max_change, b0, degenerate


@njit(cache=True, nogil=True)
def _em_fit(XT, y, nu, c, lam, kind, delta, outer_max, inner_sweeps, tol,
            beta_init, unnormalized, use_icpt, b0_init):
    """Outer reweighting loop around coordinate-descent sweeps.

    Stops when the sup-norm coefficient change over one outer iteration
    drops below tol AND the stationarity gap of the true penalized
    objective is within 8*tol (inside the certified 10*tol budget);
    a failed gap check re-enables full sweeps and continues.

    Returns (beta, b0, w, objective trace, iterations, converged,
    kkt gap, fail_iteration, degenerate flag); fail_iteration >= 0 flags a
    non-finite objective at that iteration.
    """
    p, n = XT.shape
    lam_obj = lam / n if unnormalized else lam
    beta = beta_init.copy()
    b0 = b0_init
    resid = y.copy()
    if use_icpt and b0 != 0.0:
        for i in range(n):
            resid[i] -= b0
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                resid[i] -= XT[j, i] * beta[j]
    obj_trace = np.empty(outer_max + 1)
    w = _weights(resid, nu, c, kind, delta)
    l1 = 0.0
    for j in range(p):
        l1 += abs(beta[j])
    obj_trace[0] = _loss_value(resid, nu, c, kind, delta, n) + lam_obj * l1
    converged = False
    degenerate = False
    kkt = -1.0
    sweeps_done = 0
    active = np.ones(p, dtype=np.bool_)
    it = 0
    for it in range(1, outer_max + 1):
        w = _weights(resid, nu, c, kind, delta)
        max_change = 0.0
        for s in range(inner_sweeps):
            full = sweeps_done < 2 or (sweeps_done % 10 == 9)
            change, b0, degen = _sweep(XT, resid, beta, w, lam, full, active,
                                       unnormalized, use_icpt, b0)
            if change > max_change:
                max_change = change
            if degen:
                degenerate = True
            sweeps_done += 1
            if sweeps_done % 50 == 0:
                # bound running-residual drift
                _recompute_resid(XT, y, beta, b0, resid)
        l1 = 0.0
        for j in range(p):
            l1 += abs(beta[j])
        obj = _loss_value(resid, nu, c, kind, delta, n) + lam_obj * l1
        obj_trace[it] = obj
        if not np.isfinite(obj):
            return (beta, b0, w, obj_trace[:it + 1], it, False, np.nan, it,
                    degenerate)
        if max_change < tol:
            g = _grad_true(XT, resid, nu, c, kind, delta)
            viol = _kkt_gap(g, beta, lam_obj)
            if viol <= 8.0 * tol:
                converged = True
                kkt = viol
                break
            # stationarity not certified yet: bring every coordinate back
            # into play and keep iterating
            for j in range(p):
                active[j] = True
            sweeps_done = 0
    if kkt < 0.0:
        g = _grad_true(XT, resid, nu, c, kind, delta)
        kkt = _kkt_gap(g, beta, lam_obj)
    return beta, b0, w, obj_trace[:it + 1], it, converged, kkt, -1, degenerate


@njit(cache=True, nogil=True)
def _weighted_cd(XT, y, w, lam, tol, max_sweeps, beta_init, unnormalized,
                 use_icpt, b0_init):
    """Fixed-weight weighted-lasso solve by full cyclic sweeps.

    Returns (beta, b0, sweeps, converged, degenerate).
    """
    p, n = XT.shape
    beta = beta_init.copy()
    b0 = b0_init
    resid = y.copy()
    if use_icpt and b0 != 0.0:
        for i in range(n):
            resid[i] -= b0
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                resid[i] -= XT[j, i] * beta[j]
    active = np.ones(p, dtype=np.bool_)
    converged = False
    degenerate = False
    done = 0
    for s in range(max_sweeps):
        change, b0, degen = _sweep(XT, resid, beta, w, lam, True, active,
                                   unnormalized, use_icpt, b0)
        if degen:
            degenerate = True
        done = s + 1
        if done % 50 == 0:
            _recompute_resid(XT, y, beta, b0, resid)
        if change < tol:
            converged = True
            break
    return beta, b0, done, converged, degenerate


@njit(cache=True, nogil=True)
def _lambda_max(XT, y, w):
    """max_j |sum_i w_i x_ij y_i| / n with the same summation order as _sweep."""
    p, n = XT.shape
    best = 0.0
    for j in range(p):
        zj = 0.0
        for i in range(n):
            zj += w[i] * XT[j, i] * y[i]
        a = abs(zj) / n
        if a > best:
            best = a
    return best


def warmup():
    """Trigger (cached) compilation of every kernel on tiny inputs."""
    xt = np.ascontiguousarray(np.arange(6.0).reshape(2, 3))
    y = np.array([1.0, -1.0, 0.5])
    w = np.ones(3)
    beta = np.zeros(2)
    _em_fit(xt, y, 3.0, 1.0, 0.1, KIND_STUDENT, 1.345, 5, 1, 1e-7,
            beta, False, False, 0.0)
    _weighted_cd(xt, y, w, 0.1, 1e-10, 10, beta, False, False, 0.0)
    _lambda_max(xt, y, w)
    _grad_true(xt, y, 3.0, 1.0, KIND_STUDENT, 1.345)
    _kkt_gap(np.zeros(2), beta, 0.1)
    _soft(1.0, 0.5)
    _weights(y, 3.0, 1.0, KIND_STUDENT, 1.345)
    _loss_value(y, 3.0, 1.0, KIND_STUDENT, 1.345, 3)
