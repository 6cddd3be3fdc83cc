"""Linear inverse problems: ridge-type estimation and minimax rates.

Penalized MLE for Y = A f + sigma eps, the bias-variance balancing choice
of the prior scaling mu, risk bounds over the smoothness ellipsoid
||G f||^2 <= M, commutative sequence-model rate calculators, their
non-commutative generalizations, and Monte Carlo risk verification.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import BracketExhausted, InvalidArgument, TruncationExceeded
from .linalg import min_eig_sym, op_norm_sym, require_spd, sym_inv_sqrt, sym_solve

__all__ = [
    "LinearProblem",
    "RateReport",
    "RiskBound",
    "MinimaxMcSummary",
    "pmle_linear",
    "select_mu",
    "risk_bound",
    "sequence_rate",
    "noncommutative_aj",
    "block_regularity_check",
    "minimax_mc",
]


@dataclass(frozen=True)
class LinearProblem:
    """Y = A f + sigma eps with smoothness class ||G f||^2 <= M and a
    selection map Q for the reported loss."""

    A: np.ndarray
    Gsq: np.ndarray
    sigma: float
    M: float
    Q: np.ndarray = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        gsq = np.atleast_2d(np.asarray(self.Gsq, dtype=float))
        require_spd(gsq, "Gsq")
        if gsq.shape[0] != a.shape[1]:
            raise InvalidArgument("A and Gsq dimensions do not agree")
        if not self.sigma > 0:
            raise InvalidArgument("sigma must be positive")
        if not self.M > 0:
            raise InvalidArgument("M must be positive")
        q = self.Q
        q = np.eye(a.shape[1]) if q is None else np.atleast_2d(np.asarray(q, float))
        if q.shape[1] != a.shape[1]:
            raise InvalidArgument("Q and A dimensions do not agree")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "Gsq", gsq)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "M", float(self.M))
        object.__setattr__(self, "Q", q)

    @property
    def dim(self):
        return self.A.shape[1]

    def fisher(self, mu):
        if not mu > 0:
            raise InvalidArgument("mu must be positive")
        return self.A.T @ self.A / self.sigma**2 + mu * self.Gsq


@dataclass(frozen=True)
class RateReport:
    J: int
    mu: float
    rate: float
    tr_F_mu_inv: float
    risk_bound: float
    prob_bound: float


class RiskBound(NamedTuple):
    bound: float
    prob_bound: float
    tr_Q: float


def pmle_linear(Y, prob: LinearProblem, mu):
    """Ridge-type estimator sigma^-2 F_mu^-1 A^T Y."""
    Y = np.asarray(Y, dtype=float)
    return sym_solve(prob.fisher(mu), prob.A.T @ Y / prob.sigma**2,
                     what="penalized information")


def _q_quadratic(prob, mu):
    inner = prob.Q @ sym_solve(prob.fisher(mu), prob.Q.T,
                               what="penalized information")
    inner = 0.5 * (inner + inner.T)
    return float(np.trace(inner)), op_norm_sym(inner)


def select_mu(prob: LinearProblem):
    """The mu balancing M mu ||Q F_mu^-1 Q^T|| = tr(Q F_mu^-1 Q^T).

    The left side is increasing and the right decreasing in mu, so the
    root is unique; solved on log mu to relative residual 1e-10.
    """

    def h(log_mu):
        mu = math.exp(log_mu)
        tr, norm = _q_quadratic(prob, mu)
        return prob.M * mu * norm - tr

    lo, hi = math.log(1e-8), math.log(1e12)
    if not h(lo) < 0 < h(hi):
        raise BracketExhausted(
            "no sign change for the mu balance equation in [1e-8, 1e12]")
    log_mu = brentq(h, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=500)
    mu = math.exp(log_mu)
    tr, norm = _q_quadratic(prob, mu)
    if abs(prob.M * mu * norm - tr) > 1e-10 * tr:
        raise BracketExhausted("mu balance residual did not reach 1e-10")
    return mu


def risk_bound(prob: LinearProblem, mu) -> RiskBound:
    """Loss bound 3 tr(Q F_mu^-1 Q^T) failing with probability e^{-M mu/2}."""
    tr, _ = _q_quadratic(prob, mu)
    return RiskBound(bound=3.0 * tr, prob_bound=math.exp(-0.5 * prob.M * mu),
                     tr_Q=tr)


def sequence_rate(s, alpha, L, M, sigma_sq, p_max=10_000) -> RateReport:
    """Diagonalized model with g_j^2 = j^{2s}, a_j^2 = L j^{-2alpha}.

    J is the smallest index with J g_J^2 >= M sigma^-2 a_J^2, mu = J/M, and
    the risk rate is M g_J^{-2} = M J^{-2s}.
    """
    if not s > 0.5:
        raise InvalidArgument("s must exceed 1/2 for a summable trace")
    if alpha < 0 or not L > 0 or not M > 0 or not sigma_sq > 0:
        raise InvalidArgument("need alpha >= 0 and positive L, M, sigma_sq")
    target = M * L / sigma_sq
    J = None
    for j in range(1, p_max + 1):
        if j ** (1.0 + 2.0 * s + 2.0 * alpha) >= target:
            J = j
            break
    if J is None:
        raise TruncationExceeded(f"J exceeds p_max={p_max}")
    mu = J / M
    js = np.arange(1, p_max + 1, dtype=float)
    diag = js ** (-2.0 * alpha) * (L / sigma_sq) + mu * js ** (2.0 * s)
    tr = float(np.sum(1.0 / diag))
    return RateReport(J=J, mu=mu, rate=M * J ** (-2.0 * s), tr_F_mu_inv=tr,
                      risk_bound=3.0 * tr, prob_bound=math.exp(-0.5 * M * mu))


def noncommutative_aj(A, Gsq, j):
    """Effective signal strength over the j smoothest prior directions.

    a_j^2 = 1 / ||(V_j^T A^T A V_j)^{-1}|| with V_j spanning the j smallest
    eigenvalue directions of Gsq; equals the smallest eigenvalue of the
    compressed A^T A. Returns (a_sq, singular_flag).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    gsq = np.atleast_2d(np.asarray(Gsq, dtype=float))
    p = gsq.shape[0]
    if not 1 <= j <= p:
        raise InvalidArgument("j must lie in 1..p")
    _, vecs = np.linalg.eigh(0.5 * (gsq + gsq.T))
    v_j = vecs[:, :j]
    block = v_j.T @ (A.T @ A) @ v_j
    low = min_eig_sym(0.5 * (block + block.T))
    if low <= 1e-14 * max(1.0, op_norm_sym(block)):
        return 0.0, True
    return float(low), False


def block_regularity_check(A, Gsq, mu, J):
    """How far F_mu is from block-diagonal in the prior eigenbasis.

    Splits coordinates at J, whitens F_mu = A^T A + mu Gsq (noise scale
    absorbed into A) by its block-diagonal part B and returns the smallest
    C >= 1 with C^-1 B <= F_mu <= C B together with the eigenvalue margins
    of both inequalities at that C.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    gsq = np.atleast_2d(np.asarray(Gsq, dtype=float))
    p = gsq.shape[0]
    if not 1 <= J < p:
        raise InvalidArgument("J must lie in 1..p-1")
    _, vecs = np.linalg.eigh(0.5 * (gsq + gsq.T))
    f_mu = A.T @ A + mu * gsq
    f_tilde = vecs.T @ f_mu @ vecs
    f_tilde = 0.5 * (f_tilde + f_tilde.T)
    block = np.zeros_like(f_tilde)
    block[:J, :J] = f_tilde[:J, :J]
    block[J:, J:] = f_tilde[J:, J:]
    white = sym_inv_sqrt(block, what="block-diagonal part")
    w = white @ f_tilde @ white
    w = 0.5 * (w + w.T)
    eigs = np.linalg.eigvalsh(w)
    c_hat = max(float(eigs[-1]), 1.0 / float(eigs[0]), 1.0)
    lower_margin = c_hat - float(eigs[-1])
    upper_margin = float(eigs[0]) - 1.0 / c_hat
    return lower_margin, upper_margin, c_hat


@dataclass(frozen=True)
class MinimaxMcSummary:
    worst_risk: float
    risk_at_zero: float
    tr_Q: float
    per_function: np.ndarray = field(repr=False, default=None)


def minimax_mc(prob: LinearProblem, mu, n_rep, seed) -> MinimaxMcSummary:
    """Empirical worst-case risk of the ridge estimator over boundary
    functions of the smoothness ellipsoid.

    Candidates: f = 0 and sqrt(M) w / ||G w|| for up to 12 top
    eigendirections w of F_mu^-1 (where variance, hence risk, is largest).
    """
    if n_rep < 100:
        raise InvalidArgument("n_rep must be at least 100")
    f_mu = prob.fisher(mu)
    vals, vecs = np.linalg.eigh(f_mu)
    g_sqrt = np.linalg.cholesky(prob.Gsq)
    candidates = [np.zeros(prob.dim)]
    for k in range(min(12, prob.dim)):
        w = vecs[:, k]
        scale = math.sqrt(prob.M) / np.linalg.norm(g_sqrt.T @ w)
        candidates.append(scale * w)

    ridge = sym_solve(f_mu, prob.A.T, what="penalized information") / prob.sigma**2
    q_ridge = prob.Q @ ridge
    tr, _ = _q_quadratic(prob, mu)
    risks = np.empty(len(candidates))
    for i, f in enumerate(candidates):
        rng = np.random.default_rng((seed, i))
        eps = rng.standard_normal((n_rep, prob.A.shape[0]))
        clean = prob.A @ f
        qf = prob.Q @ f
        est = (clean + prob.sigma * eps) @ q_ridge.T
        loss_sq = np.sum((est - qf) ** 2, axis=1)
        risks[i] = float(np.mean(loss_sq))
    return MinimaxMcSummary(worst_risk=float(np.max(risks)),
                            risk_at_zero=float(risks[0]), tr_Q=tr,
                            per_function=risks)
