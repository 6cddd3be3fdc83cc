"""Gaussian-approximation diagnostics for the posterior.

Effective dimension, Monte Carlo estimation of the third- and fourth-order
smoothness constants delta_m, the diamond and rho error terms with their
hypothesis flags, sandwich bounds for centrally symmetric credible sets,
empirical symmetric-set discrepancy between sample sets, and credible-set
radius and coverage machinery.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import thread_map
from .core import ExtendedPoint, PriorSpec, breve_hessian, hessian_blocks, invert_blocks
from .errors import InvalidArgument
from .linalg import op_norm_sym, sym_inv_sqrt, sym_sqrt
from .pmle import SolverOptions, joint_newton, population_optimum

__all__ = [
    "SmoothnessReport",
    "BvmReport",
    "CoverageResult",
    "effective_dimension",
    "delta_m_estimate",
    "diamond",
    "rho_bound",
    "sandwich_probability",
    "symmetric_set_discrepancy",
    "credible_radius",
    "coverage_experiment",
]


@dataclass(frozen=True)
class SmoothnessReport:
    """delta_3/delta_4 estimates at radius r0 with the derived error terms.

    diamond = 4 delta3^2 + 4 delta4 controls the Gaussian approximation on
    centrally symmetric sets; C0 = 1 - 3 delta3 / r0^2 the concavity margin.
    """

    r0: float
    delta3: float
    delta4: float
    diamond: float
    C0: float
    n_points: int
    n_dirs: int

    @property
    def hypothesis_ok(self):
        return self.diamond <= 0.5 and self.C0 >= 0.5


@dataclass(frozen=True)
class BvmReport:
    """rho and sandwich factors at (r0, x) with all hypothesis flags."""

    p_G_tilde: float
    rho_r0: float
    lower_factor: float
    upper_factor: float
    x: float
    diamond: float
    hyp_diamond_ok: bool
    hyp_c0_ok: bool
    hyp_radius_ok: bool

    @classmethod
    def build(cls, smooth: SmoothnessReport, x, p_G_tilde):
        rho = rho_bound(smooth, x, p_G_tilde)
        dia = smooth.diamond
        lower = (1.0 - dia) / (1.0 + dia + rho)
        upper = (1.0 + dia) / ((1.0 - dia) * (1.0 - math.exp(-x)))
        radius_ok = smooth.C0 * smooth.r0 >= 2.0 * math.sqrt(p_G_tilde) + math.sqrt(x)
        return cls(
            p_G_tilde=float(p_G_tilde), rho_r0=rho, lower_factor=lower,
            upper_factor=upper, x=float(x), diamond=dia,
            hyp_diamond_ok=bool(dia <= 0.5), hyp_c0_ok=bool(smooth.C0 >= 0.5),
            hyp_radius_ok=bool(radius_ok))


def effective_dimension(upsilon: ExtendedPoint, sigma, prior: PriorSpec, model,
                        use_breve=False):
    """tr(IF IF_G^{-1}): unpenalized information against penalized."""
    if use_breve:
        pen = breve_hessian(upsilon.f, sigma, prior, model, penalized=True)
        unpen = breve_hessian(upsilon.f, sigma, prior, model, penalized=False)
    else:
        pen = hessian_blocks(upsilon, sigma, prior, model, penalized=True)
        unpen = hessian_blocks(upsilon, sigma, prior, model, penalized=False)
    return float(np.trace(np.linalg.solve(pen.assembled(), unpen.assembled())))


def _metric_inv_sqrt(center, sigma, prior, model, metric):
    d = prior.dim_f + prior.dim_g
    if metric == "euclidean":
        return np.eye(d), np.eye(d)
    if metric == "D_G":
        big = hessian_blocks(center, sigma, prior, model, penalized=True).assembled()
    elif metric == "D":
        big = hessian_blocks(center, sigma, prior, model, penalized=False).assembled()
    else:
        raise InvalidArgument(f"unknown metric {metric!r}")
    return sym_inv_sqrt(big, what=f"{metric} metric"), big


def _third_fourth(model, f, g, alphas, betas, m):
    """m-th derivative of t -> ||g + t beta - A(f + t alpha)||^2 at t=0,
    for a batch of directions."""
    delta = g - model.apply(f)
    a1 = model.dir_deriv_batch(f, alphas, 1)
    a2 = model.dir_deriv_batch(f, alphas, 2)
    a3 = model.dir_deriv_batch(f, alphas, 3)
    if m == 3:
        return -6.0 * np.sum((betas - a1) * a2, axis=1) - 2.0 * (a3 @ delta)
    a4 = model.dir_deriv_batch(f, alphas, 4)
    return (6.0 * np.sum(a2 * a2, axis=1)
            - 8.0 * np.sum((betas - a1) * a3, axis=1) - 2.0 * (a4 @ delta))


def delta_m_estimate(center: ExtendedPoint, r, m, sigma, prior: PriorSpec,
                     model, metric="D_G", n_points=64, n_dirs=256, seed=0):
    """Monte Carlo sup of (lam/2) |d^m/dt^m ||g + t beta - A(f + t alpha)||^2|
    over points in the metric ball of radius r around center and directions
    on the metric sphere of radius r, sharpened by local hill climbing.

    Only the structural penalty contributes derivatives beyond order two,
    so linear models return 0 exactly. Deterministic given seed; the result
    is a lower estimate of the true sup, non-decreasing in n_dirs.
    """
    if m not in (3, 4):
        raise InvalidArgument("m must be 3 or 4")
    if not r > 0:
        raise InvalidArgument("r must be positive")
    if model.is_linear:
        return 0.0
    d_inv, big = _metric_inv_sqrt(center, sigma, prior, model, metric)
    d = prior.dim_f + prior.dim_g
    p = prior.dim_f
    rng = np.random.default_rng(seed)

    def reproject(u):
        if metric == "euclidean":
            q = np.linalg.norm(u)
        else:
            q = math.sqrt(float(u @ big @ u))
        if q <= 0:
            return None
        return (r / q) * u

    def sphere(w):
        return reproject(d_inv @ w)

    dirs = [sphere(np.sign(s) * np.eye(d)[k]) for k in range(d) for s in (1.0, -1.0)]
    dirs += [sphere(rng.standard_normal(d)) for _ in range(n_dirs)]
    dirs = np.array([u for u in dirs if u is not None])

    radii = np.concatenate([[0.0], rng.uniform(0.0, 1.0, size=n_points)])
    raw = rng.standard_normal((n_points + 1, d))
    points = [center.stacked()]
    for t, w in zip(radii[1:], raw[1:]):
        u = sphere(w)
        if u is not None:
            points.append(center.stacked() + t * u)

    lam_half = 0.5 * prior.lam
    best_val = -1.0
    best_pt = points[0]
    best_dir = dirs[0]
    for pt in points:
        f, g = pt[:p], pt[p:]
        vals = np.abs(_third_fourth(model, f, g, dirs[:, :p], dirs[:, p:], m))
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_pt = pt
            best_dir = dirs[j]

    for _ in range(20):
        cand_dirs = []
        for _ in range(8):
            u = reproject(best_dir + 0.3 * (d_inv @ rng.standard_normal(d)))
            if u is not None:
                cand_dirs.append(u)
        if not cand_dirs:
            continue
        cand_dirs = np.array(cand_dirs)
        cand_pt = best_pt
        shift = d_inv @ rng.standard_normal(d)
        x = best_pt + 0.15 * r * shift / max(np.linalg.norm(shift), 1e-300) \
            - center.stacked()
        if metric == "euclidean":
            q = np.linalg.norm(x)
        else:
            q = math.sqrt(float(x @ big @ x))
        if q > r:
            x = x * (r / q)
        alt_pt = center.stacked() + x
        for pt in (cand_pt, alt_pt):
            f, g = pt[:p], pt[p:]
            vals = np.abs(_third_fourth(model, f, g, cand_dirs[:, :p],
                                        cand_dirs[:, p:], m))
            j = int(np.argmax(vals))
            if vals[j] > best_val:
                best_val = float(vals[j])
                best_pt = pt
                best_dir = cand_dirs[j]
    return lam_half * best_val


def diamond(r0, delta3, delta4, n_points=0, n_dirs=0) -> SmoothnessReport:
    """Assemble the smoothness report; hypothesis violations are flagged on
    the report, not raised."""
    if not r0 > 0:
        raise InvalidArgument("r0 must be positive")
    dia = 4.0 * delta3**2 + 4.0 * delta4
    c0 = 1.0 - 3.0 * delta3 / r0**2
    return SmoothnessReport(r0=float(r0), delta3=float(delta3),
                            delta4=float(delta4), diamond=dia, C0=c0,
                            n_points=int(n_points), n_dirs=int(n_dirs))


def rho_bound(smooth: SmoothnessReport, x, p_G_tilde):
    """Posterior mass outside the local ball:
    (1 - diamond)^{-1} e^{-(p+x)/2} / (1 - e^{-(p+x)/2})."""
    if smooth.diamond >= 1.0:
        raise InvalidArgument("diamond >= 1 makes the bound vacuous")
    if not x > 0:
        raise InvalidArgument("x must be positive")
    core = math.exp(-0.5 * (p_G_tilde + x))
    return core / ((1.0 - smooth.diamond) * (1.0 - core))


def _draws(sample):
    return sample.draws if hasattr(sample, "draws") else np.asarray(sample, float)


def sandwich_probability(A_indicator, sample_posterior, sample_gauss,
                         report: BvmReport, x):
    """Bracket the posterior probability of a centrally symmetric set by the
    Gaussian reference probability with the (diamond, rho) corrections.

    Both sample sets must be centered. Returns (post_p, gauss_p, lower,
    upper, contained) with contained allowing 3 MC standard errors.
    """
    post = _draws(sample_posterior)
    gauss = _draws(sample_gauss)
    in_post = np.asarray(A_indicator(post), dtype=bool)
    in_gauss = np.asarray(A_indicator(gauss), dtype=bool)
    post_p = float(np.mean(in_post))
    gauss_p = float(np.mean(in_gauss))
    lower = report.lower_factor * gauss_p - report.rho_r0
    upper = report.upper_factor * gauss_p + report.rho_r0
    factor = max(report.lower_factor, report.upper_factor)
    se = math.sqrt(post_p * (1 - post_p) / len(post)) + factor * math.sqrt(
        gauss_p * (1 - gauss_p) / len(gauss))
    contained = bool(lower - 3 * se <= post_p <= upper + 3 * se)
    return post_p, gauss_p, lower, upper, contained


def _ball_family(pool_cov_sqrt_inv, n_levels, pooled):
    white = pooled @ pool_cov_sqrt_inv.T
    norms = np.linalg.norm(white, axis=1)
    qs = np.quantile(norms, np.linspace(0.02, 0.98, n_levels))

    def make(radius):
        def ind(draws):
            return np.linalg.norm(draws @ pool_cov_sqrt_inv.T, axis=1) <= radius
        return ind

    return [make(rad) for rad in qs]


def _box_family(scales, n_levels, pooled):
    ratios = np.max(np.abs(pooled) / scales, axis=1)
    qs = np.quantile(ratios, np.linspace(0.02, 0.98, n_levels))

    def make(level):
        def ind(draws):
            return np.max(np.abs(draws) / scales, axis=1) <= level
        return ind

    return [make(level) for level in qs]


def symmetric_set_discrepancy(sample_posterior, sample_gauss, family="both"):
    """Max difference of empirical probabilities over centrally symmetric
    sets: 50 concentric metric balls (whitened by the reference covariance)
    and 50 coordinate boxes by default. Both sample sets must be centered.
    """
    post = _draws(sample_posterior)
    gauss = _draws(sample_gauss)
    if post.shape[1] != gauss.shape[1]:
        raise InvalidArgument("sample sets must share the dimension")
    if isinstance(family, str):
        pooled = np.vstack([post, gauss])
        cov = np.cov(gauss, rowvar=False)
        cov = np.atleast_2d(cov)
        sqrt_inv = sym_inv_sqrt(cov + 1e-12 * np.eye(cov.shape[0]) * np.trace(cov),
                                what="reference covariance")
        scales = np.maximum(np.std(gauss, axis=0), 1e-12)
        if family == "balls":
            fam = _ball_family(sqrt_inv, 50, pooled)
        elif family == "boxes":
            fam = _box_family(scales, 50, pooled)
        elif family == "both":
            fam = _ball_family(sqrt_inv, 50, pooled) + _box_family(scales, 50, pooled)
        else:
            raise InvalidArgument(f"unknown family {family!r}")
    else:
        fam = list(family)
    worst = 0.0
    for ind in fam:
        p1 = float(np.mean(np.asarray(ind(post), dtype=bool)))
        p2 = float(np.mean(np.asarray(ind(gauss), dtype=bool)))
        worst = max(worst, abs(p1 - p2))
    return worst


def credible_radius(Q, ff_sqrt_inv, alpha, n_mc=100_000, seed=0):
    """Empirical (1-alpha) quantile of ||Q ff_sqrt_inv gamma|| over standard
    normal draws: the radius of the level-alpha credible set for Q f."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument("alpha must lie in (0, 1)")
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    ff_sqrt_inv = np.atleast_2d(np.asarray(ff_sqrt_inv, dtype=float))
    rng = np.random.default_rng(seed)
    mat = Q @ ff_sqrt_inv
    norms = np.empty(n_mc)
    chunk = 200_000
    done = 0
    while done < n_mc:
        take = min(chunk, n_mc - done)
        gam = rng.standard_normal((take, mat.shape[1]))
        norms[done:done + take] = np.linalg.norm(gam @ mat.T, axis=1)
        done += take
    return float(np.quantile(norms, 1.0 - alpha))


@dataclass(frozen=True)
class CoverageResult:
    coverage: float
    miscoverage: float
    r_alpha: float
    bias_ratio: float
    n_rep: int


def coverage_experiment(fstar, sigma, prior: PriorSpec, model, Q, alpha,
                        n_rep, master_seed=0, n_mc=100_000) -> CoverageResult:
    """Frequentist coverage of the posterior credible ball for Q f.

    Per replication: draw Y = A(f*) + sigma eps, fit, and count
    ||Q (f_hat - f*)|| <= r_alpha. Reports the small-modeling-bias ratio
    ||Q breve_ff_inv Q^T|| ||G f*||^2 / tr(B_Q) alongside.
    """
    if n_rep < 1:
        raise InvalidArgument("n_rep must be positive")
    fstar = np.asarray(fstar, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    opts = SolverOptions()
    star = population_optimum(fstar, sigma, prior, model, opts=opts).upsilon_hat

    inv = invert_blocks(hessian_blocks(star, sigma, prior, model))
    breve_inv = invert_blocks(breve_hessian(star.f, sigma, prior, model))
    b_q = (Q @ inv.fg @ inv.fg.T @ Q.T) / sigma**2
    tr_bq = float(np.trace(b_q))
    g_norm_sq = float(fstar @ prior.Gsq @ fstar)
    bias_num = op_norm_sym(Q @ breve_inv.ff_inv @ Q.T) * g_norm_sq
    if tr_bq > 0:
        bias_ratio = bias_num / tr_bq
    else:
        bias_ratio = 0.0 if bias_num == 0.0 else math.inf

    fixed_radius = None
    if model.is_linear:
        ff_sqrt_inv = sym_sqrt(inv.ff_inv, what="posterior f-covariance")
        fixed_radius = credible_radius(Q, ff_sqrt_inv, alpha, n_mc=n_mc,
                                       seed=master_seed + 101)
    g_star = model.apply(fstar)

    def one(rep):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((master_seed, rep))))
        Y = g_star + sigma * rng.standard_normal(prior.dim_g)
        fit = joint_newton(Y, sigma, prior, model, opts=opts)
        if fixed_radius is not None:
            rad = fixed_radius
        else:
            inv_rep = invert_blocks(
                hessian_blocks(fit.upsilon_hat, sigma, prior, model))
            rad = credible_radius(
                Q, sym_sqrt(inv_rep.ff_inv, what="posterior f-covariance"),
                alpha, n_mc=n_mc, seed=master_seed + 101)
        err = float(np.linalg.norm(Q @ (fit.upsilon_hat.f - fstar)))
        return err <= rad, rad

    results = thread_map(one, range(n_rep))
    hits = [h for h, _ in results]
    rads = [rad for _, rad in results]
    coverage = float(np.mean(hits))
    return CoverageResult(coverage=coverage, miscoverage=1.0 - coverage,
                          r_alpha=float(np.mean(rads)), bias_ratio=bias_ratio,
                          n_rep=n_rep)
