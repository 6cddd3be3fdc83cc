"""Penalized maximum-likelihood estimation for the extended parameter.

Alternating coordinate ascent (exact g-update, damped Newton f-update), a
joint damped-Newton cross-check solver, the population optimum under
noiseless data, the concentration radius of the estimator around it, and
Fisher-expansion and loss-decomposition diagnostics.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    ExtendedPoint,
    NoiseEnvelope,
    PriorSpec,
    breve_hessian,
    grad,
    hessian_blocks,
    invert_blocks,
    loglik,
)
from .errors import ConcentrationUnverifiable, InvalidArgument
from .linalg import min_eig_sym, op_norm_sym, sym_inv_sqrt, sym_solve, sym_sqrt
from .toolkit import QuadFormStats, z_gauss, z_nongauss_form

__all__ = [
    "SolverOptions",
    "PmleResult",
    "ConcentrationReport",
    "FisherResidual",
    "LossDecomposition",
    "g_step",
    "f_step",
    "alternate",
    "joint_newton",
    "population_optimum",
    "concentration_radius",
    "fisher_residual",
    "loss_decomposition",
]


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 500
    tol: float = 1e-10
    grad_tol: float = 1e-8
    damping: float = 1.0
    include_second_order: bool = False
    max_halvings: int = 30

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise InvalidArgument("damping must lie in (0, 1]")


@dataclass(frozen=True)
class PmleResult:
    upsilon_hat: ExtendedPoint
    iterations: int
    converged: bool
    final_grad_norm: float
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class ConcentrationReport:
    """Radius certificate: ||D_G(upsilon_hat - upsilon_star_G)|| <= r_G
    holds with probability at least 1 - 2 e^{-x} (Gaussian noise) or the
    sub-exponential analogue, provided rho <= 1/2.

    Self-consistency invariants: r_G = z_val / (1 - rho) and
    3 delta3G / r_G^2 <= rho.
    """

    r_G: float
    rho: float
    z_val: float
    delta3G: float
    effective_dim_p_eps: float
    lambda_eps: float


def g_step(f, Y, sigma, prior: PriorSpec, model):
    """Exact conditional maximizer over g at fixed f.

    {(sigma^-2 + lam) I_q + Gammasq}^-1 {sigma^-2 Y + lam A(f) + Gammasq g0}
    """
    f = np.asarray(f, dtype=float)
    Y = np.asarray(Y, dtype=float)
    s2inv = 1.0 / sigma**2
    lhs = (s2inv + prior.lam) * np.eye(prior.dim_g) + prior.Gammasq
    rhs = s2inv * Y + prior.lam * model.apply(f) + prior.Gammasq @ prior.g0
    return np.linalg.solve(lhs, rhs)


def _f_curvature(f, delta, prior: PriorSpec, model, include_second_order):
    jac = model.jacobian(f)
    quad = jac.T @ jac
    if include_second_order:
        quad = quad - model.weighted_hessian(f, delta)
    return prior.Gsq + prior.lam * quad


def f_step(f_prev, g_tilde, prior: PriorSpec, model, include_second_order=False,
           damping=1.0):
    """One damped Newton ascent step in f at fixed g.

    f_prev + damping * Fblock^-1 (lam grad_A^T (g_tilde - A(f_prev))
                                  - Gsq (f_prev - f0)),
    with Fblock either the local linearization (default) or the full
    curvature including the elasticity-weighted second derivative.
    """
    f_prev = np.asarray(f_prev, dtype=float)
    g_tilde = np.asarray(g_tilde, dtype=float)
    delta = g_tilde - model.apply(f_prev)
    fblock = _f_curvature(f_prev, delta, prior, model, include_second_order)
    ascent = prior.lam * (model.jacobian(f_prev).T @ delta) - prior.Gsq @ (
        f_prev - prior.f0
    )
    return f_prev + damping * sym_solve(fblock, ascent, what="f-step curvature")


def _grad_norm(point, Y, sigma, prior, model):
    d_f, d_g = grad(point, Y, sigma, prior, model)
    return math.sqrt(float(d_f @ d_f + d_g @ d_g))


def _converged(point_old, point_new, value, gnorm, opts):
    move = np.linalg.norm(point_new.stacked() - point_old.stacked())
    rel = move / (1.0 + np.linalg.norm(point_old.stacked()))
    return rel < opts.tol or gnorm < opts.grad_tol * (1.0 + abs(value))


def alternate(Y, sigma, prior: PriorSpec, model, opts: SolverOptions = None):
    """Alternate the exact g-update and the damped Newton f-update.

    Starts at (f0, A(f0)). The f-substep backtracks by halving until the
    objective does not decrease, so the trace is non-decreasing.
    """
    opts = opts or SolverOptions()
    Y = np.asarray(Y, dtype=float)
    f = prior.f0.copy()
    point = ExtendedPoint(f, model.apply(f))
    value = loglik(point, Y, sigma, prior, model)
    trace = [value]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        g_new = g_step(point.f, Y, sigma, prior, model)
        mid = ExtendedPoint(point.f, g_new)
        trace.append(loglik(mid, Y, sigma, prior, model))

        step = opts.damping
        f_new = point.f
        for _ in range(opts.max_halvings + 1):
            cand = f_step(mid.f, g_new, prior, model,
                          include_second_order=opts.include_second_order,
                          damping=step)
            cand_val = loglik(ExtendedPoint(cand, g_new), Y, sigma, prior, model)
            if cand_val >= trace[-1]:
                f_new = cand
                break
            step *= 0.5
        new_point = ExtendedPoint(f_new, g_new)
        new_value = loglik(new_point, Y, sigma, prior, model)
        trace.append(new_value)

        gnorm = _grad_norm(new_point, Y, sigma, prior, model)
        if _converged(point, new_point, new_value, gnorm, opts):
            point, value = new_point, new_value
            converged = True
            break
        point, value = new_point, new_value
    gnorm = _grad_norm(point, Y, sigma, prior, model)
    return PmleResult(upsilon_hat=point, iterations=it, converged=converged,
                      final_grad_norm=gnorm, trace=trace)


def _ridge_shifted_solve(blocks, rhs):
    big = blocks.assembled()
    floor = 1e-10 * (1.0 + op_norm_sym(big))
    low = min_eig_sym(big)
    if low < floor:
        big = big + (floor - low) * np.eye(big.shape[0])
    return np.linalg.solve(big, rhs)


def joint_newton(Y, sigma, prior: PriorSpec, model, opts: SolverOptions = None,
                 start: ExtendedPoint = None):
    """Damped Newton on the stacked parameter, cross-check for alternate.

    Indefinite curvature (possible far from the optimum through the
    elasticity-weighted term) is ridge-shifted to stay an ascent direction.
    """
    opts = opts or SolverOptions()
    Y = np.asarray(Y, dtype=float)
    if start is None:
        start = ExtendedPoint(prior.f0.copy(), model.apply(prior.f0))
    point = start
    value = loglik(point, Y, sigma, prior, model)
    trace = [value]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        d_f, d_g = grad(point, Y, sigma, prior, model)
        g_vec = np.concatenate([d_f, d_g])
        blocks = hessian_blocks(point, sigma, prior, model)
        direction = _ridge_shifted_solve(blocks, g_vec)

        step = opts.damping
        new_point, new_value = point, value
        for _ in range(opts.max_halvings + 1):
            cand = ExtendedPoint.from_stacked(point.stacked() + step * direction,
                                              prior.dim_f)
            cand_val = loglik(cand, Y, sigma, prior, model)
            if cand_val >= value:
                new_point, new_value = cand, cand_val
                break
            step *= 0.5
        trace.append(new_value)
        gnorm = _grad_norm(new_point, Y, sigma, prior, model)
        if _converged(point, new_point, new_value, gnorm, opts):
            point, value = new_point, new_value
            converged = True
            break
        point, value = new_point, new_value
    gnorm = _grad_norm(point, Y, sigma, prior, model)
    return PmleResult(upsilon_hat=point, iterations=it, converged=converged,
                      final_grad_norm=gnorm, trace=trace)


def population_optimum(fstar, sigma, prior: PriorSpec, model,
                       opts: SolverOptions = None):
    """Maximizer of the expected objective: solve with noiseless data A(f*)."""
    fstar = np.asarray(fstar, dtype=float)
    g_star = model.apply(fstar)
    start = ExtendedPoint(fstar, g_star)
    return joint_newton(g_star, sigma, prior, model, opts=opts, start=start)


def _delta3_at(center, r, sigma, prior, model):
    from .bvm import delta_m_estimate

    return delta_m_estimate(center, r, 3, sigma, prior, model, metric="D_G")


def concentration_radius(upsilon_star_G: ExtendedPoint, sigma, prior: PriorSpec,
                         model, noise: NoiseEnvelope, x) -> ConcentrationReport:
    """Self-consistent radius r_G = z(B_eps, x) / (1 - rho).

    B_eps = sigma^-2 S gg_inv S summarizes the stochastic term; rho is the
    smallest value with 3 delta3(r_G) / r_G^2 <= rho, found by fixed-point
    iteration from rho = 0. Values above 1/2 void the certificate.
    """
    if not x > 0:
        raise InvalidArgument("x must be positive")
    blocks = hessian_blocks(upsilon_star_G, sigma, prior, model)
    inv = invert_blocks(blocks)
    b_eps = (noise.S @ inv.gg_inv @ noise.S) / sigma**2
    stats = QuadFormStats.from_matrix(b_eps)
    if math.isinf(noise.g_exp):
        z_val = z_gauss(stats, x).value
    else:
        z_val = z_nongauss_form(stats, x, noise.g_exp).value

    rho = 0.0
    r = z_val
    d3 = 0.0
    found = False
    for k in range(50):
        r = z_val / (1.0 - rho)
        d3 = _delta3_at(upsilon_star_G, r, sigma, prior, model)
        ratio = 3.0 * d3 / r**2
        if ratio > 0.5 + 1e-12:
            raise ConcentrationUnverifiable(
                "rho exceeds 1/2, the radius certificate is void",
                delta3=d3, rho=ratio)
        if k >= 7 and ratio <= rho + 1e-12:
            found = True
            break
        rho = ratio
    if not found:
        for bump in (1e-10, 1e-8, 1e-6, 1e-4):
            cand = min(rho * (1.0 + bump) + bump, 0.5)
            r = z_val / (1.0 - cand)
            d3 = _delta3_at(upsilon_star_G, r, sigma, prior, model)
            if 3.0 * d3 / r**2 <= cand:
                rho = cand
                found = True
                break
    if not found:
        raise ConcentrationUnverifiable(
            "fixed-point iteration for rho did not stabilize",
            delta3=d3, rho=rho)
    return ConcentrationReport(
        r_G=r, rho=rho, z_val=z_val, delta3G=d3,
        effective_dim_p_eps=stats.p_tr, lambda_eps=stats.lam)


class FisherResidual(NamedTuple):
    lhs_sq: float
    bound: float


def fisher_residual(upsilon_hat: ExtendedPoint, upsilon_star_G: ExtendedPoint,
                    sigma, prior: PriorSpec, model, eps_vec,
                    report: ConcentrationReport = None,
                    noise: NoiseEnvelope = None, x=2.0) -> FisherResidual:
    """Fisher-expansion error: ||D_G (hat - star) - D_G^-1 grad zeta||^2
    against its bound 4 delta3G(r_G).

    grad zeta = (0, eps / sigma) is the stochastic gradient component for
    the realized noise. The bound comes from report (computed here with
    Gaussian envelope when omitted).
    """
    eps_vec = np.asarray(eps_vec, dtype=float)
    blocks = hessian_blocks(upsilon_star_G, sigma, prior, model)
    big = blocks.assembled()
    d_sqrt = sym_sqrt(big, what="information at the population optimum")
    d_inv_sqrt = sym_inv_sqrt(big, what="information at the population optimum")
    diff = upsilon_hat.stacked() - upsilon_star_G.stacked()
    nabla = np.concatenate([np.zeros(prior.dim_f), eps_vec / sigma])
    resid = d_sqrt @ diff - d_inv_sqrt @ nabla
    lhs_sq = float(resid @ resid)
    if report is None:
        noise = noise or NoiseEnvelope.identity(prior.dim_g)
        report = concentration_radius(upsilon_star_G, sigma, prior, model,
                                      noise, x)
    return FisherResidual(lhs_sq, 4.0 * report.delta3G)


class LossDecomposition(NamedTuple):
    stochastic: float
    bias: float
    bound: float
    up_to_constant: bool = True


def loss_decomposition(Q, upsilon_hat: ExtendedPoint,
                       upsilon_star_G: ExtendedPoint, fstar, sigma,
                       prior: PriorSpec, model, noise: NoiseEnvelope = None,
                       x=3.0) -> LossDecomposition:
    """Split ||Q(f_hat - f*)|| into stochastic and bias parts with a bound.

    stochastic = ||Q (f_hat - f*_G)||, bias = ||Q (f*_G - f*)||, and
    bound = ||Q breve_ff_inv Q^T||^(1/2) ||G f*|| + z(B_Q, x) with
    B_Q = sigma^-2 Q fg S^2 fg^T Q^T (up to the universal constant on the
    bias part, reported as 1).
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    fstar = np.asarray(fstar, dtype=float)
    noise = noise or NoiseEnvelope.identity(prior.dim_g)
    stochastic = float(np.linalg.norm(Q @ (upsilon_hat.f - upsilon_star_G.f)))
    bias = float(np.linalg.norm(Q @ (upsilon_star_G.f - fstar)))

    breve_inv = invert_blocks(
        breve_hessian(upsilon_star_G.f, sigma, prior, model))
    bias_part = math.sqrt(op_norm_sym(Q @ breve_inv.ff_inv @ Q.T)) * math.sqrt(
        float(fstar @ prior.Gsq @ fstar))

    inv = invert_blocks(hessian_blocks(upsilon_star_G, sigma, prior, model))
    s_sq = noise.S @ noise.S
    b_q = (Q @ inv.fg @ s_sq @ inv.fg.T @ Q.T) / sigma**2
    stats = QuadFormStats.from_matrix(b_q)
    if math.isinf(noise.g_exp):
        z_val = z_gauss(stats, x).value
    else:
        z_val = z_nongauss_form(stats, x, noise.g_exp).value
    return LossDecomposition(stochastic, bias, bias_part + z_val)
