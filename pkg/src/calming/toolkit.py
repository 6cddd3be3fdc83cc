"""Concentration and approximation toolkit.

Quantile functions for Gaussian and sub-exponential quadratic forms,
chi-squared bounds, concavity tail bounds, Gaussian-integral ratio bounds,
a Gaussian comparison quantity, and numerical checkers for the local
Taylor-expansion bounds. Everything here is a pure function of its inputs;
Monte Carlo oracles live in the test suite.

Conventions. Quadratic-form statistics are p_tr = tr(B), v = sqrt(tr(B^2)),
lam = ||B||_op. Smoothness constants delta_m bound the raw m-th directional
derivative magnitude |d^m/dt^m f(x + t u)| over the checked set, without a
1/m! division; this makes every reported bound conservative.
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateSpectrum, InvalidArgument

__all__ = [
    "QuadFormStats",
    "NonGaussParams",
    "SpectrumPair",
    "SmoothFunction",
    "ZGauss",
    "ZNonGaussForm",
    "GaussIntegralBound",
    "GaussianComparison",
    "TaylorCheck",
    "z_gauss",
    "chi2_bounds",
    "z_nongauss",
    "z_nongauss_form",
    "nongauss_prob_bound",
    "concavity_tail",
    "gauss_integral_bound",
    "gaussian_comparison",
    "taylor_lemma_check",
]


@dataclass(frozen=True)
class QuadFormStats:
    """Scalar summaries of a symmetric nonnegative operator B.

    p_tr : trace of B
    v : sqrt of tr(B^2) (Frobenius norm)
    lam : operator norm of B
    """

    p_tr: float
    v: float
    lam: float

    def __post_init__(self):
        for name in ("p_tr", "v", "lam"):
            val = float(getattr(self, name))
            object.__setattr__(self, name, val)
            if not (np.isfinite(val) and val >= 0.0):
                raise InvalidArgument(f"{name} must be finite and nonnegative")

    @classmethod
    def from_matrix(cls, b):
        b = np.asarray(b, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise InvalidArgument("B must be a square matrix")
        b = 0.5 * (b + b.T)
        eigs = np.linalg.eigvalsh(b)
        return cls(
            p_tr=float(np.trace(b)),
            v=float(np.sqrt(np.sum(eigs**2))),
            lam=float(np.max(np.abs(eigs))),
        )


class ZGauss(NamedTuple):
    value: float
    simplified: float


def z_gauss(stats: QuadFormStats, x) -> ZGauss:
    """Upper quantile of <B gamma, gamma> for standard normal gamma.

    Returns z with P(<B gamma, gamma> > z^2) <= e^{-x}:
        value = sqrt(p_tr + 2 v sqrt(x) + 2 lam x)
    together with the weaker closed cap sqrt(p_tr) + sqrt(2 lam x).
    """
    if x < 0:
        raise InvalidArgument("x must be nonnegative")
    value = math.sqrt(stats.p_tr + 2.0 * stats.v * math.sqrt(x) + 2.0 * stats.lam * x)
    simplified = math.sqrt(stats.p_tr) + math.sqrt(2.0 * stats.lam * x)
    return ZGauss(value=value, simplified=simplified)


def chi2_bounds(p, x):
    """Chi-squared deviation thresholds at confidence e^{-x}.

    Returns (upper_sq, upper_norm, lower_sq):
        P(||gamma||^2 >= p + 2 sqrt(p x) + 2 x) <= e^{-x}
        P(||gamma||   >= sqrt(p) + sqrt(2 x))   <= e^{-x}
        P(||gamma||^2 <= p - 2 sqrt(p x))       <= e^{-x}
    """
    if p < 1:
        raise InvalidArgument("p must be at least 1")
    if x < 0:
        raise InvalidArgument("x must be nonnegative")
    root = math.sqrt(p * x)
    return (p + 2.0 * root + 2.0 * x, math.sqrt(p) + math.sqrt(2.0 * x), p - 2.0 * root)


@dataclass(frozen=True)
class NonGaussParams:
    """Crossover parameters for sub-exponential quadratic-form quantiles.

    g_exp : exponential-moment radius
    x_c : crossover confidence level g_exp^2 / 4
    z_c : quantile value at the crossover
    g_c : slope normalizer of the linear tail branch
    """

    g_exp: float
    x_c: float
    z_c: float
    g_c: float

    @classmethod
    def for_norm(cls, p, g_exp):
        x_c = g_exp**2 / 4.0
        z_c = math.sqrt(p + 2.0 * math.sqrt(p * x_c) + 2.0 * x_c)
        alpha = math.sqrt(p) / g_exp
        g_c = z_c / (1.0 + alpha)
        return cls(g_exp=float(g_exp), x_c=x_c, z_c=z_c, g_c=g_c)

    @classmethod
    def for_form(cls, stats: QuadFormStats, g_exp):
        x_c = g_exp**2 / 4.0
        z_c = math.sqrt(stats.p_tr + 2.0 * stats.v * math.sqrt(x_c) + 2.0 * stats.lam * x_c)
        g_c = (z_c / math.sqrt(stats.lam)) / (1.0 + stats.v / (stats.lam * g_exp))
        return cls(g_exp=float(g_exp), x_c=x_c, z_c=z_c, g_c=g_c)


def z_nongauss(p, x, g_exp):
    """Norm quantile for a vector with exponential moments up to radius g_exp.

    P(||xi|| >= z) <= 2 e^{-x} + 8.4 e^{-x_c} 1(x < x_c). Gaussian-like branch
    sqrt(p + 2 sqrt(p x) + 2 x) below the crossover x_c = g_exp^2/4, linear
    in x above it. Requires 0.3 g_exp >= sqrt(p).
    """
    if x < 0:
        raise InvalidArgument("x must be nonnegative")
    if not 0.3 * g_exp >= math.sqrt(p):
        raise InvalidArgument(
            f"hypothesis 0.3 g_exp >= sqrt(p) violated: g_exp={g_exp}, p={p}"
        )
    if math.isinf(g_exp):
        return math.sqrt(p + 2.0 * math.sqrt(p * x) + 2.0 * x)
    par = NonGaussParams.for_norm(p, g_exp)
    if x <= par.x_c:
        return math.sqrt(p + 2.0 * math.sqrt(p * x) + 2.0 * x)
    return par.z_c + 2.0 * (x - par.x_c) / par.g_c


class ZNonGaussForm(NamedTuple):
    value: float
    simplified: float
    prelude_hypothesis_ok: bool


def z_nongauss_form(stats: QuadFormStats, x, g_exp) -> ZNonGaussForm:
    """Quadratic-form quantile <B xi, xi> under exponential moments.

    Gated on 0.3 g_exp >= sqrt(p_tr / lam); the stricter variant
    0.3 g_exp >= sqrt(p_tr) is reported as prelude_hypothesis_ok.
    simplified caps the first branch by sqrt(p_tr) + sqrt(2 lam x).
    """
    if x < 0:
        raise InvalidArgument("x must be nonnegative")
    if stats.lam <= 0:
        raise InvalidArgument("lam must be positive")
    if not 0.3 * g_exp >= math.sqrt(stats.p_tr / stats.lam):
        raise InvalidArgument(
            "hypothesis 0.3 g_exp >= sqrt(p_tr/lam) violated: "
            f"g_exp={g_exp}, p_tr={stats.p_tr}, lam={stats.lam}"
        )
    prelude_ok = bool(0.3 * g_exp >= math.sqrt(stats.p_tr))
    gauss = z_gauss(stats, x)
    if math.isinf(g_exp):
        return ZNonGaussForm(gauss.value, gauss.simplified, prelude_ok)
    par = NonGaussParams.for_form(stats, g_exp)
    if x <= par.x_c:
        return ZNonGaussForm(gauss.value, gauss.simplified, prelude_ok)
    tail = par.z_c + 2.0 * stats.lam * (x - par.x_c) / par.g_c
    return ZNonGaussForm(tail, tail, prelude_ok)


def nongauss_prob_bound(x, g_exp):
    """Tail probability 2 e^{-x} + 8.4 e^{-x_c} 1(x < x_c), x_c = g_exp^2/4."""
    if x < 0:
        raise InvalidArgument("x must be nonnegative")
    out = 2.0 * math.exp(-x)
    if not math.isinf(g_exp):
        x_c = g_exp**2 / 4.0
        if x < x_c:
            out += 8.4 * math.exp(-x_c)
    return out


def concavity_tail(r0, r, delta3_r0):
    """Upper bound on f(x+u) - f(x) - <grad f(x), u> outside the local ball.

    For concave f with curvature radius r0 and third-order bound delta3_r0
    on the r0-ball, at curvature radius r > r0:
        -(r r0 - r0^2/2) (1 - 3 delta3_r0 / r0^2).
    """
    if not (r0 > 0 and r > r0):
        raise InvalidArgument("need r > r0 > 0")
    return -(r * r0 - 0.5 * r0**2) * (1.0 - 3.0 * delta3_r0 / r0**2)


class GaussIntegralBound(NamedTuple):
    r0_required: float
    numerator_bound: float
    denominator_bound: float
    up_to_constant: bool = True


def gauss_integral_bound(p_tau, x, C0) -> GaussIntegralBound:
    """Radius and bounds for the Gaussian tail-ratio estimate.

    With C0 r0 = 2 sqrt(p_tau) + sqrt(x) and 1/2 < C0 <= 1, the exponential
    tail integral outside radius r0 is at most e^{-(p_tau + x)/2} (up to a
    universal constant, reported as 1 and flagged), while the central mass
    is at least 1 - e^{-(p_tau + x)/2}.
    """
    if not (0.5 < C0 <= 1.0):
        raise InvalidArgument("C0 must lie in (1/2, 1]")
    if not x > 0:
        raise InvalidArgument("x must be positive")
    if p_tau < 0:
        raise InvalidArgument("p_tau must be nonnegative")
    r0 = (2.0 * math.sqrt(p_tau) + math.sqrt(x)) / C0
    tail = math.exp(-0.5 * (p_tau + x))
    return GaussIntegralBound(r0, tail, 1.0 - tail)


@dataclass(frozen=True)
class SpectrumPair:
    """Two covariance spectra and a mean shift for the comparison bound.

    lam_xi, lam_eta : eigenvalues in non-increasing order, nonnegative
    a_shift : mean shift vector a
    """

    lam_xi: np.ndarray
    lam_eta: np.ndarray
    a_shift: np.ndarray

    def __post_init__(self):
        for name in ("lam_xi", "lam_eta"):
            seq = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if seq.size == 0 or np.any(seq < 0):
                raise InvalidArgument(f"{name} must be a nonempty nonnegative sequence")
            if np.any(np.diff(seq) > 1e-12 * (1.0 + seq[0])):
                raise InvalidArgument(f"{name} must be non-increasing")
            object.__setattr__(self, name, seq)
        object.__setattr__(
            self, "a_shift", np.asarray(self.a_shift, dtype=float).reshape(-1)
        )


def _tail_sums(lam):
    lam1 = math.sqrt(float(np.sum(lam**2)))
    lam2 = math.sqrt(float(np.sum(lam[1:] ** 2)))
    return lam1, lam2


class GaussianComparison(NamedTuple):
    value: float
    frobenius: float
    frobenius_applicable: bool
    up_to_constant: bool = True


def gaussian_comparison(sp: SpectrumPair) -> GaussianComparison:
    """Explicit bound on sup_x |P(||xi - a|| <= x) - P(||eta|| <= x)|.

    value uses the tail factors (Lambda_1 Lambda_2)^{-1/2} of each spectrum;
    frobenius is the alternative with 1/Lambda_1 factors, applicable when
    3 lam_max^2 <= sum lam_j^2 holds for both spectra. Universal constants
    are omitted (up_to_constant flag).
    """
    l1x, l2x = _tail_sums(sp.lam_xi)
    l1e, l2e = _tail_sums(sp.lam_eta)
    if l2x <= 0.0 or l2e <= 0.0:
        raise DegenerateSpectrum(
            "need at least two nonzero eigenvalues in each spectrum"
        )
    n = max(sp.lam_xi.size, sp.lam_eta.size)
    lx = np.zeros(n)
    le = np.zeros(n)
    lx[: sp.lam_xi.size] = sp.lam_xi
    le[: sp.lam_eta.size] = sp.lam_eta
    mass = float(np.sum(np.abs(lx - le))) + float(sp.a_shift @ sp.a_shift)
    value = (1.0 / math.sqrt(l1x * l2x) + 1.0 / math.sqrt(l1e * l2e)) * mass
    frob = (1.0 / l1x + 1.0 / l1e) * mass
    applicable = bool(
        3.0 * sp.lam_xi[0] ** 2 <= l1x**2 and 3.0 * sp.lam_eta[0] ** 2 <= l1e**2
    )
    return GaussianComparison(value=value, frobenius=frob, frobenius_applicable=applicable)


@dataclass(frozen=True)
class SmoothFunction:
    """Function handle exposing directional derivatives up to order 4.

    value : x -> float
    dir_deriv : (x, u, m) -> float, the m-th derivative of t -> f(x + t u)
    """

    value: Callable
    dir_deriv: Callable


class TaylorCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool
    hypothesis_ok: bool


def _segment_delta(fun, x, u, m, t_lo=-2.0, t_hi=2.0, n=33):
    """max_t |f^(m)(x + t u, u)| over the checked segment."""
    ts = np.linspace(t_lo, t_hi, n)
    return max(abs(float(fun.dir_deriv(x + t * u, u, m))) for t in ts)


def _box_nodes(widths, n_axis=64):
    """Tensor Gauss-Legendre nodes and weights on the box prod [-w_i, w_i]."""
    t, w = np.polynomial.legendre.leggauss(n_axis)
    axes = [(wd * t, wd * w) for wd in widths]
    if len(widths) == 1:
        return axes[0][0].reshape(-1, 1), axes[0][1]
    n0, w0 = axes[0]
    n1, w1 = axes[1]
    pts = np.array([(a, b) for a in n0 for b in n1])
    wts = np.array([wa * wb for wa in w0 for wb in w1])
    return pts, wts


def _box_delta(fun, x, widths, m, n_angle=64):
    """max |f^(m)(x + v, u')| over box points v and boundary directions u'."""
    d = len(widths)
    if d == 1:
        dirs = [np.array([widths[0]]), np.array([-widths[0]])]
        pts = [np.array([t * widths[0]]) for t in np.linspace(-1, 1, 9)]
    else:
        dirs = []
        for theta in np.linspace(0.0, 2.0 * math.pi, n_angle, endpoint=False):
            c, s = math.cos(theta), math.sin(theta)
            scale = 1.0 / max(abs(c) / widths[0], abs(s) / widths[1], 1e-300)
            dirs.append(np.array([scale * c, scale * s]))
        for sx in (-1, 1):
            for sy in (-1, 1):
                dirs.append(np.array([sx * widths[0], sy * widths[1]]))
        grid = np.linspace(-1, 1, 5)
        pts = [np.array([a * widths[0], b * widths[1]]) for a in grid for b in grid]
    best = 0.0
    for v in pts:
        for u in dirs:
            best = max(best, abs(float(fun.dir_deriv(x + v, u, m))))
    return best


def taylor_lemma_check(fun: SmoothFunction, x, u, which) -> TaylorCheck:
    """Numerically instantiate one of the local Taylor-expansion bounds.

    which selects the checked inequality:
      sym_exp   : |avg of e^{f(x+-u)-f(x)-+f'(x,u)} - e^{f''(x,u)/2}|
                  <= e^{f''(x,u)/2} (4 delta3^2 + 4 delta4)
      one_sided : |e^{f(x+u)-f(x)-f'(x,u)} - e^{f''(x,u)/2}|
                  <= delta3 e^{f''(x,u)/2}
      grad_cont : |f'(x+u,u) - f'(x,u) - f''(x,u)| <= 3 delta3
      hess_cont : |f''(x+u,u) - f''(x,u)| <= 3 delta3
      integral  : same as sym_exp with both sides integrated over the
                  centrally symmetric box spanned by |u| (d <= 2 only),
                  via tensor Gauss-Legendre quadrature.

    delta_m is the maximum raw m-th directional derivative magnitude over
    the checked segment (or box); values above 1 trip hypothesis_ok but the
    comparison is still evaluated. holds is lhs <= rhs + 1e-12.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))

    if which == "integral":
        if x.size > 2:
            raise InvalidArgument("integral variant supports d <= 2 only")
        widths = np.abs(u)
        if np.any(widths <= 0):
            raise InvalidArgument("integral variant needs nonzero direction entries")
        pts, wts = _box_nodes(list(widths))
        f_x = float(fun.value(x))
        vals_exact = np.empty(len(pts))
        vals_gauss = np.empty(len(pts))
        for i, v in enumerate(pts):
            vals_exact[i] = math.exp(
                float(fun.value(x + v)) - f_x - float(fun.dir_deriv(x, v, 1))
            )
            vals_gauss[i] = math.exp(0.5 * float(fun.dir_deriv(x, v, 2)))
        i_exact = float(wts @ vals_exact)
        i_gauss = float(wts @ vals_gauss)
        d3 = _box_delta(fun, x, list(widths), 3)
        d4 = _box_delta(fun, x, list(widths), 4)
        lhs = abs(i_exact - i_gauss)
        rhs = (4.0 * d3**2 + 4.0 * d4) * i_gauss
        hyp = bool(d3 <= 1.0 and d4 <= 1.0)
        return TaylorCheck(lhs, rhs, bool(lhs <= rhs + 1e-12), hyp)

    f_x = float(fun.value(x))
    d1 = float(fun.dir_deriv(x, u, 1))
    d2 = float(fun.dir_deriv(x, u, 2))
    if which == "sym_exp":
        d3 = _segment_delta(fun, x, u, 3)
        d4 = _segment_delta(fun, x, u, 4)
        base = math.exp(0.5 * d2)
        plus = math.exp(float(fun.value(x + u)) - f_x - d1)
        minus = math.exp(float(fun.value(x - u)) - f_x + d1)
        lhs = abs(0.5 * (plus + minus) - base)
        rhs = base * (4.0 * d3**2 + 4.0 * d4)
        hyp = bool(d3 <= 1.0 and d4 <= 1.0)
    elif which == "one_sided":
        d3 = _segment_delta(fun, x, u, 3)
        base = math.exp(0.5 * d2)
        plus = math.exp(float(fun.value(x + u)) - f_x - d1)
        lhs = abs(plus - base)
        rhs = d3 * base
        hyp = bool(d3 <= 1.0)
    elif which == "grad_cont":
        d3 = _segment_delta(fun, x, u, 3)
        lhs = abs(float(fun.dir_deriv(x + u, u, 1)) - d1 - d2)
        rhs = 3.0 * d3
        hyp = bool(d3 <= 1.0)
    elif which == "hess_cont":
        d3 = _segment_delta(fun, x, u, 3)
        lhs = abs(float(fun.dir_deriv(x + u, u, 2)) - d2)
        rhs = 3.0 * d3
        hyp = bool(d3 <= 1.0)
    else:
        raise InvalidArgument(f"unknown check variant {which!r}")
    return TaylorCheck(lhs, rhs, bool(lhs <= rhs + 1e-12), hyp)
