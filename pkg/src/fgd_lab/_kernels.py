"""Compiled inner loops for million-step trajectory runs and risk recursions.

Each trajectory kernel advances `theta` in place over one chunk of
pre-drawn randomness and writes the squared error at the requested
checkpoint offsets. The return value is -1 on success, or the 1-based
local index of the first update that produced a non-finite coordinate.

All loops are written in plain scalar form; numba compiles them to native
code (cached on disk) and they release the GIL so runs can share threads.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _mse(theta, theta_star):
    s = 0.0
    for j in range(theta.size):
        diff = theta[j] - theta_star[j]
        s += diff * diff
    return s


@njit(cache=True, nogil=True)
def sgd_chunk(theta, theta_star, x_rows, eps, alphas, cp_offsets, mse_out):
    n, d = x_rows.shape
    cp_i = 0
    for i in range(n):
        y = eps[i]
        pred = 0.0
        for j in range(d):
            y += x_rows[i, j] * theta_star[j]
            pred += x_rows[i, j] * theta[j]
        residual = y - pred
        coef = alphas[i] * residual
        ok = True
        for j in range(d):
            theta[j] += coef * x_rows[i, j]
            if not np.isfinite(theta[j]):
                ok = False
        if not ok:
            return i + 1
        if cp_i < cp_offsets.size and cp_offsets[cp_i] == i:
            mse_out[cp_i] = _mse(theta, theta_star)
            cp_i += 1
    return -1


@njit(cache=True, nogil=True)
def forward_gradient_chunk(theta, theta_star, x_rows, eps, xis, alphas, cp_offsets, mse_out):
    n, d = x_rows.shape
    cp_i = 0
    for i in range(n):
        y = eps[i]
        pred = 0.0
        x_dot_xi = 0.0
        for j in range(d):
            y += x_rows[i, j] * theta_star[j]
            pred += x_rows[i, j] * theta[j]
            x_dot_xi += x_rows[i, j] * xis[i, j]
        residual = y - pred
        # theta - alpha * (g . xi) xi with g = -residual * x
        coef = alphas[i] * residual * x_dot_xi
        ok = True
        for j in range(d):
            theta[j] += coef * xis[i, j]
            if not np.isfinite(theta[j]):
                ok = False
        if not ok:
            return i + 1
        if cp_i < cp_offsets.size and cp_offsets[cp_i] == i:
            mse_out[cp_i] = _mse(theta, theta_star)
            cp_i += 1
    return -1


@njit(cache=True, nogil=True)
def zeroth_order_chunk(theta, theta_star, x_rows, eps, xis, alphas, cp_offsets, mse_out):
    n, d = x_rows.shape
    cp_i = 0
    for i in range(n):
        y = eps[i]
        pred = 0.0
        x_dot_xi = 0.0
        for j in range(d):
            y += x_rows[i, j] * theta_star[j]
            pred += x_rows[i, j] * theta[j]
            x_dot_xi += x_rows[i, j] * xis[i, j]
        residual = y - pred
        perturbed = residual - x_dot_xi
        delta = 0.5 * perturbed * perturbed - 0.5 * residual * residual
        coef = -alphas[i] * delta
        ok = True
        for j in range(d):
            theta[j] += coef * xis[i, j]
            if not np.isfinite(theta[j]):
                ok = False
        if not ok:
            return i + 1
        if cp_i < cp_offsets.size and cp_offsets[cp_i] == i:
            mse_out[cp_i] = _mse(theta, theta_star)
            cp_i += 1
    return -1


@njit(cache=True, nogil=True)
def diag_cov_traces(sigma_diag, a_diag0, alphas):
    """Trace of the covariance recursion after every step, diagonal case.

    When sigma and A_0 are both diagonal every term of the recursion maps
    diagonal matrices to diagonal matrices, so the whole run costs O(d)
    per step. Returns traces[0..n] with traces[0] = sum(a_diag0).
    """
    d = sigma_diag.size
    n = alphas.size
    a = a_diag0.copy()
    traces = np.empty(n + 1)
    traces[0] = a.sum()
    for k in range(n):
        al = alphas[k]
        al2 = al * al
        tr_sa = 0.0
        tr_sas = 0.0
        tr_s = 0.0
        for j in range(d):
            tr_sa += sigma_diag[j] * a[j]
            tr_sas += sigma_diag[j] * sigma_diag[j] * a[j]
            tr_s += sigma_diag[j]
        isotropic = 2.0 * al2 * tr_sas + al2 * tr_sa * tr_s + al2 * tr_s
        total = 0.0
        for j in range(d):
            s = sigma_diag[j]
            contraction = 1.0 - al * s
            aj = (
                contraction * a[j] * contraction
                + 3.0 * al2 * s * a[j] * s
                + 2.0 * al2 * tr_sa * s
                + 2.0 * al2 * s
                + isotropic
            )
            a[j] = aj
            total += aj
        traces[k + 1] = total
    return traces
