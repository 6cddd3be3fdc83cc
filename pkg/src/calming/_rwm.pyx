# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled random-walk Metropolis kernel for the built-in model kinds.

kind 0: linear map, A(f) = mat @ f.
kind 1: exponential composition, A(f) = mat @ exp(f).

Algorithmically identical to the pure-numpy fallback (same pregenerated
increments and log-uniforms, same adaptation schedule); only summation
order differs, so cross-backend agreement is statistical, not bitwise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, isfinite

cnp.import_array()


cdef double _loglik(double[::1] x, int kind, double[:, ::1] mat,
                    double[::1] Y, double inv2s2, double lam_half,
                    double[:, ::1] Gsq, double[::1] f0,
                    double[:, ::1] Gammasq, double[::1] g0,
                    double[::1] ef, int p, int q) noexcept nogil:
    cdef double res = 0.0
    cdef double r, af, acc
    cdef int i, j
    for i in range(q):
        r = Y[i] - x[p + i]
        res -= r * r * inv2s2
    if kind == 1:
        for j in range(p):
            ef[j] = exp(x[j])
    for i in range(q):
        af = 0.0
        if kind == 1:
            for j in range(p):
                af += mat[i, j] * ef[j]
        else:
            for j in range(p):
                af += mat[i, j] * x[j]
        r = x[p + i] - af
        res -= lam_half * r * r
    for i in range(p):
        acc = 0.0
        for j in range(p):
            acc += Gsq[i, j] * (x[j] - f0[j])
        res -= 0.5 * (x[i] - f0[i]) * acc
    for i in range(q):
        acc = 0.0
        for j in range(q):
            acc += Gammasq[i, j] * (x[p + j] - g0[j])
        res -= 0.5 * (x[p + i] - g0[i]) * acc
    return res


def run_chain(double[:, ::1] increments, double[::1] logu, double[::1] x0,
              int burn_in, int thinning, double c0, double target_accept,
              int adapt_batch, int kind, double[:, ::1] mat, double[::1] Y,
              double sigma, double[:, ::1] Gsq, double[::1] f0,
              double[:, ::1] Gammasq, double[::1] g0, double lam,
              int p, int q):
    """Returns (retained draws, accepted count after burn-in, c_final)."""
    cdef int n_steps = increments.shape[0]
    cdef int d = increments.shape[1]
    cdef int n_keep = 0
    if n_steps > burn_in:
        n_keep = (n_steps - burn_in + thinning - 1) // thinning
    out_arr = np.empty((n_keep, d))
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    y_arr = np.empty(d)
    ef_arr = np.empty(p)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] ef = ef_arr
    cdef double inv2s2 = 0.5 / (sigma * sigma)
    cdef double lam_half = 0.5 * lam
    cdef double c = c0
    cdef double ll_x, ll_y
    cdef int t, i, k_out = 0
    cdef int batch_accept = 0, accept_post = 0

    ll_x = _loglik(x, kind, mat, Y, inv2s2, lam_half, Gsq, f0, Gammasq, g0,
                   ef, p, q)
    if not isfinite(ll_x):
        raise ValueError("log-likelihood not finite at the start point")
    with nogil:
        for t in range(n_steps):
            for i in range(d):
                y[i] = x[i] + c * increments[t, i]
            ll_y = _loglik(y, kind, mat, Y, inv2s2, lam_half, Gsq, f0,
                           Gammasq, g0, ef, p, q)
            if isfinite(ll_y) and logu[t] < ll_y - ll_x:
                for i in range(d):
                    x[i] = y[i]
                ll_x = ll_y
                if t >= burn_in:
                    accept_post += 1
                else:
                    batch_accept += 1
            if t < burn_in and (t + 1) % adapt_batch == 0:
                c *= exp(batch_accept / <double> adapt_batch - target_accept)
                batch_accept = 0
            if t >= burn_in and (t - burn_in) % thinning == 0:
                for i in range(d):
                    out[k_out, i] = x[i]
                k_out += 1
    return out_arr, accept_post, c
