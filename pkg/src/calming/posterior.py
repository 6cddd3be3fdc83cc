"""Posterior sampling over the extended parameter.

Exact Gaussian posterior for linear models, preconditioned random-walk
Metropolis for the general case (compiled kernel with a pure-numpy
fallback), iid sampling from the Gaussian reference law centered at the
penalized MLE, and the sequential recentering iteration.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _rwm_py
from ._parallel import thread_map
from .core import ExtendedPoint, PriorSpec, hessian_blocks
from .errors import InvalidArgument, NumericOverflow, SamplerStuck
from .forward import ExpComposedModel, LinearModel
from .linalg import require_spd, sym_inv_sqrt, sym_inverse
from .pmle import SolverOptions, joint_newton

try:
    from . import _rwm as _rwm_compiled
except ImportError:  # extension not built; fallback stays available
    _rwm_compiled = None

__all__ = [
    "ChainConfig",
    "GaussianPosterior",
    "SampleSet",
    "compiled_kernel_available",
    "exact_gaussian_posterior",
    "mcmc_sample",
    "gaussian_reference",
    "sequential_bayes",
]


def compiled_kernel_available():
    return _rwm_compiled is not None


@dataclass(frozen=True)
class ChainConfig:
    """n_samples counts all steps per chain, burn-in included."""

    n_samples: int
    burn_in: int
    thinning: int = 1
    target_accept: float = 0.234
    master_seed: int = 0
    n_chains: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_samples:
            raise InvalidArgument("need 0 <= burn_in < n_samples")
        if self.thinning < 1:
            raise InvalidArgument("thinning must be at least 1")
        if self.n_chains < 1:
            raise InvalidArgument("n_chains must be at least 1")
        if not 0.0 < self.target_accept < 1.0:
            raise InvalidArgument("target_accept must lie in (0, 1)")


@dataclass(frozen=True)
class SampleSet:
    """Retained draws (chains concatenated in index order), acceptance
    rate after burn-in, and the minimum effective sample size over
    coordinates."""

    draws: np.ndarray
    accept_rate: float
    ess_min: float
    n_chains: int = 1

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if not np.all(np.isfinite(draws)):
            raise InvalidArgument("draws must be finite")
        if not 0.0 <= self.accept_rate <= 1.0:
            raise InvalidArgument("accept_rate must lie in [0, 1]")
        object.__setattr__(self, "draws", draws)

    @property
    def per_chain(self):
        return self.draws.shape[0] // self.n_chains

    def chain(self, i):
        per = self.per_chain
        return self.draws[i * per:(i + 1) * per]


def _ess_1d(x):
    n = x.size
    x = x - x.mean()
    var = float(x @ x) / n
    if n < 4 or var <= 0.0:
        return float(n)
    nfft = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]
    total = 0.0
    k = 0
    while 2 * k + 1 < n:
        pair = float(rho[2 * k] + rho[2 * k + 1])
        if pair <= 0.0:
            break
        total += pair
        k += 1
    tau = max(2.0 * total - 1.0, 1.0 / n)
    return float(n / tau)


def _ess_min(draws, n_chains):
    per = draws.shape[0] // n_chains
    worst = math.inf
    for j in range(draws.shape[1]):
        tot = sum(_ess_1d(draws[i * per:(i + 1) * per, j])
                  for i in range(n_chains))
        worst = min(worst, tot)
    return worst


class GaussianPosterior(NamedTuple):
    mean: ExtendedPoint
    cov: np.ndarray


def exact_gaussian_posterior(Y, sigma, prior: PriorSpec, model):
    """Closed-form posterior for a linear forward map.

    The objective is an exact quadratic, so the posterior is Gaussian with
    precision equal to the assembled penalized information and mean equal
    to the penalized MLE.
    """
    if not model.is_linear:
        raise InvalidArgument("exact posterior requires a linear model")
    Y = np.asarray(Y, dtype=float)
    point = ExtendedPoint(prior.f0, model.apply(prior.f0))
    big = hessian_blocks(point, sigma, prior, model).assembled()
    rhs = np.concatenate([
        prior.Gsq @ prior.f0,
        Y / sigma**2 + prior.Gammasq @ prior.g0,
    ])
    mean = np.linalg.solve(big, rhs)
    cov = sym_inverse(big, what="posterior precision")
    return GaussianPosterior(ExtendedPoint.from_stacked(mean, prior.dim_f),
                             cov)


def _ll_closure(Y, sigma, prior, model):
    p = prior.dim_f
    inv2s2 = 0.5 / sigma**2
    lam_half = 0.5 * prior.lam
    gsq, gam = prior.Gsq, prior.Gammasq
    f0, g0 = prior.f0, prior.g0

    def ll(x):
        f = x[:p]
        g = x[p:]
        try:
            af = model.apply(f)
        except NumericOverflow:
            return -math.inf
        r1 = Y - g
        r2 = g - af
        df = f - f0
        dg = g - g0
        return float(-(r1 @ r1) * inv2s2 - lam_half * (r2 @ r2)
                     - 0.5 * (df @ (gsq @ df)) - 0.5 * (dg @ (gam @ dg)))

    return ll


def _kernel_kind(model):
    if isinstance(model, LinearModel):
        return 0, model.matrix
    if isinstance(model, ExpComposedModel):
        return 1, model.K
    return None, None


def mcmc_sample(Y, sigma, prior: PriorSpec, model, cfg: ChainConfig,
                precond="auto", backend="auto") -> SampleSet:
    """Random-walk Metropolis with proposal covariance c^2 * precond.

    precond="auto" uses the inverse assembled information at the penalized
    MLE (one pre-run of the joint solver); the scale c is adapted toward
    target_accept once per 100-step batch during burn-in and frozen after,
    so the retained chain is Markov with the correct invariant law.
    backend: "auto" prefers the compiled kernel for the built-in model
    kinds, "compiled" requires it, "python" forces the fallback.
    """
    Y = np.asarray(Y, dtype=float)
    d = prior.dim_f + prior.dim_g
    fit = joint_newton(Y, sigma, prior, model, opts=SolverOptions())
    x0 = fit.upsilon_hat.stacked()
    if isinstance(precond, str):
        if precond != "auto":
            raise InvalidArgument(f"unknown preconditioner {precond!r}")
        big = hessian_blocks(fit.upsilon_hat, sigma, prior, model).assembled()
        pre = sym_inverse(big, what="proposal preconditioner")
    else:
        pre = np.asarray(precond, dtype=float)
        require_spd(pre, "proposal preconditioner")
    chol = np.linalg.cholesky(pre)

    kind, mat = _kernel_kind(model)
    if backend == "auto":
        use_compiled = _rwm_compiled is not None and kind is not None
    elif backend == "compiled":
        if _rwm_compiled is None:
            raise InvalidArgument("compiled kernel is not available")
        if kind is None:
            raise InvalidArgument(
                "compiled kernel supports only the built-in model kinds")
        use_compiled = True
    elif backend == "python":
        use_compiled = False
    else:
        raise InvalidArgument(f"unknown backend {backend!r}")

    c0 = 2.38 / math.sqrt(d)
    ll = None if use_compiled else _ll_closure(Y, sigma, prior, model)

    def run(idx):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((cfg.master_seed, idx))))
        incr = rng.standard_normal((cfg.n_samples, d)) @ chol.T
        logu = np.log(rng.random(cfg.n_samples))
        if use_compiled:
            return _rwm_compiled.run_chain(
                np.ascontiguousarray(incr), logu, x0, cfg.burn_in,
                cfg.thinning, c0, cfg.target_accept, 100, kind,
                np.ascontiguousarray(mat), Y, float(sigma),
                np.ascontiguousarray(prior.Gsq), prior.f0,
                np.ascontiguousarray(prior.Gammasq), prior.g0,
                float(prior.lam), prior.dim_f, prior.dim_g)
        return _rwm_py.run_chain(ll, x0, incr, logu, cfg.burn_in,
                                 cfg.thinning, c0, cfg.target_accept, 100)

    results = thread_map(run, range(cfg.n_chains))
    draws = np.vstack([r[0] for r in results])
    accepted = sum(r[1] for r in results)
    post_steps = cfg.n_chains * (cfg.n_samples - cfg.burn_in)
    if accepted == 0:
        raise SamplerStuck(
            "no proposal accepted after burn-in",
            diagnostics={"c_final": [r[2] for r in results],
                         "n_steps": post_steps})
    return SampleSet(draws=draws, accept_rate=accepted / post_steps,
                     ess_min=_ess_min(draws, cfg.n_chains),
                     n_chains=cfg.n_chains)


def gaussian_reference(upsilon_hat: ExtendedPoint, sigma, prior: PriorSpec,
                       model, n, seed) -> SampleSet:
    """n iid draws from N(upsilon_hat, assembled_information^{-1})."""
    if n < 1:
        raise InvalidArgument("n must be positive")
    big = hessian_blocks(upsilon_hat, sigma, prior, model).assembled()
    inv_sqrt = sym_inv_sqrt(big, what="information at the center")
    rng = np.random.default_rng(seed)
    gam = rng.standard_normal((n, big.shape[0]))
    draws = upsilon_hat.stacked() + gam @ inv_sqrt
    return SampleSet(draws=draws, accept_rate=1.0, ess_min=float(n),
                     n_chains=1)


def sequential_bayes(data_source, sigma, prior0: PriorSpec, model, K,
                     cfg: ChainConfig):
    """K recentering steps, each with fresh data.

    data_source is a callable k -> Y^(k) or an iterable of independent
    samples; reusing one dataset across steps is the caller's deliberate
    choice, never the default. After step k the prior is recentered at
    (f_hat_k, A(f_hat_k)). Returns [(map_point, SampleSet), ...].
    """
    if K < 1:
        raise InvalidArgument("K must be at least 1")
    if callable(data_source):
        get = data_source
    else:
        it = iter(data_source)

        def get(_):
            return next(it)

    prior = prior0
    out = []
    for k in range(K):
        y_k = np.asarray(get(k), dtype=float)
        seed_k = int(np.random.SeedSequence(
            (cfg.master_seed, 7000 + k)).generate_state(1)[0])
        sample = mcmc_sample(y_k, sigma, prior, model,
                             replace(cfg, master_seed=seed_k))
        center = joint_newton(y_k, sigma, prior, model,
                              opts=SolverOptions()).upsilon_hat
        out.append((center, sample))
        prior = PriorSpec(f0=center.f, Gsq=prior.Gsq,
                          g0=model.apply(center.f), Gammasq=prior.Gammasq,
                          lam=prior.lam)
    return out
