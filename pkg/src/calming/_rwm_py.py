"""Pure-numpy random-walk Metropolis kernel, fallback for the compiled one.

Both kernels implement the identical algorithm: pregenerated proposal
increments and log-uniforms, scale c adapted once per batch during burn-in
only, retained states taken every `thinning` steps from burn_in onward.
Results are deterministic for fixed inputs within a backend; across
backends agreement is statistical (floating-point summation orders differ).
"""

import math

import numpy as np


def run_chain(ll_fn, x0, increments, logu, burn_in, thinning, c0,
              target_accept, adapt_batch=100):
    """Returns (retained draws, accepted count after burn-in, c_final)."""
    n_steps, d = increments.shape
    x = np.array(x0, dtype=float, copy=True)
    ll_x = float(ll_fn(x))
    if not math.isfinite(ll_x):
        raise ValueError("log-likelihood not finite at the start point")
    keep_idx = range(burn_in, n_steps, thinning)
    out = np.empty((len(keep_idx), d))
    c = float(c0)
    batch_accept = 0
    accept_post = 0
    k_out = 0
    for t in range(n_steps):
        y = x + c * increments[t]
        ll_y = float(ll_fn(y))
        if math.isfinite(ll_y) and logu[t] < ll_y - ll_x:
            x = y
            ll_x = ll_y
            if t >= burn_in:
                accept_post += 1
            else:
                batch_accept += 1
        if t < burn_in and (t + 1) % adapt_batch == 0:
            rate = batch_accept / adapt_batch
            c *= math.exp(rate - target_accept)
            batch_accept = 0
        if t >= burn_in and (t - burn_in) % thinning == 0:
            out[k_out] = x
            k_out += 1
    return out, accept_post, c
