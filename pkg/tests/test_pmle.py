"""Penalized-MLE solvers, concentration radius, and loss diagnostics."""

import dataclasses
import math

import numpy as np
import pytest

from calming import (
    ConcentrationUnverifiable,
    ExpComposedModel,
    ExtendedPoint,
    InvalidArgument,
    LinearModel,
    LinearProblem,
    NoiseEnvelope,
    PriorSpec,
    SolverOptions,
    alternate,
    concentration_radius,
    exact_gaussian_posterior,
    fisher_residual,
    g_step,
    grad,
    joint_newton,
    loglik,
    loss_decomposition,
    pmle_linear,
    population_optimum,
)
from conftest import random_linear_instance


def strong_exp_instance(scale=48.0):
    """Exponential-composition instance in the high-signal regime."""
    K = scale * np.array([[1.0, 0.25], [0.15, 0.9]])
    model = ExpComposedModel(K)
    sigma = 0.1
    prior = PriorSpec(f0=np.zeros(2), Gsq=np.eye(2),
                      g0=model.apply(np.zeros(2)), Gammasq=np.eye(2),
                      lam=1.0 / sigma**2)
    return model, prior, sigma


# ----------------------------------------------------------------- g_step

def test_g_step_pinned():
    # lhs = (1 + 1) I + I = 3 I, rhs = Y + A f = (3, 6), so g = (1, 2)
    model = LinearModel(np.eye(2))
    prior = PriorSpec(f0=np.zeros(2), Gsq=np.eye(2), g0=np.zeros(2),
                      Gammasq=np.eye(2), lam=1.0)
    g = g_step(np.array([2.0, 4.0]), np.array([1.0, 2.0]), 1.0, prior, model)
    assert np.allclose(g, [1.0, 2.0])


def test_g_step_stationarity(rng):
    # oracle: the conditional maximizer zeroes the g-component of the score
    for _ in range(5):
        model, prior, sigma = random_linear_instance(rng)
        f = rng.standard_normal(prior.dim_f)
        Y = rng.standard_normal(prior.dim_g)
        g = g_step(f, Y, sigma, prior, model)
        _, d_g = grad(ExtendedPoint(f, g), Y, sigma, prior, model)
        assert np.linalg.norm(d_g) < 1e-10 * (1 + np.linalg.norm(Y))


def test_g_step_is_conditional_max(rng, exp_instance):
    model, prior, sigma = exp_instance
    f = np.array([0.2, -0.3])
    Y = rng.standard_normal(3)
    g = g_step(f, Y, sigma, prior, model)
    base = loglik(ExtendedPoint(f, g), Y, sigma, prior, model)
    for _ in range(10):
        pert = g + 0.1 * rng.standard_normal(3)
        assert loglik(ExtendedPoint(f, pert), Y, sigma, prior, model) <= base


# ------------------------------------------------------------------ solvers

def test_alternate_trace_monotone(rng, exp_instance):
    model, prior, sigma = exp_instance
    Y = model.apply(np.array([0.3, -0.2])) + sigma * rng.standard_normal(3)
    res = alternate(Y, sigma, prior, model)
    assert res.converged
    trace = np.array(res.trace)
    assert np.all(np.diff(trace) >= -1e-12 * (1 + np.abs(trace[:-1])))
    assert res.final_grad_norm < 1e-6


def test_alternate_matches_exact_gaussian_mean(rng):
    # linear objective is exactly quadratic, so the solver must land on the
    # closed-form Gaussian mean
    for _ in range(5):
        model, prior, sigma = random_linear_instance(rng)
        Y = rng.standard_normal(prior.dim_g)
        res = alternate(Y, sigma, prior, model)
        exact = exact_gaussian_posterior(Y, sigma, prior, model).mean
        assert np.allclose(res.upsilon_hat.stacked(), exact.stacked(),
                           atol=1e-8)


def test_alternate_joint_agree_linear(rng):
    for _ in range(5):
        model, prior, sigma = random_linear_instance(
            rng, lam_is_inv_sigma_sq=False)
        Y = rng.standard_normal(prior.dim_g)
        a = alternate(Y, sigma, prior, model)
        b = joint_newton(Y, sigma, prior, model)
        assert np.allclose(a.upsilon_hat.stacked(), b.upsilon_hat.stacked(),
                           atol=1e-8)


def test_alternate_joint_agree_exp(rng, exp_instance):
    model, prior, sigma = exp_instance
    for _ in range(3):
        Y = model.apply(np.array([0.3, -0.2])) + sigma * rng.standard_normal(3)
        a = alternate(Y, sigma, prior, model)
        b = joint_newton(Y, sigma, prior, model)
        assert a.converged and b.converged
        assert np.allclose(a.upsilon_hat.stacked(), b.upsilon_hat.stacked(),
                           atol=1e-8)


def test_alternate_joint_agree_exp_second_order(rng, exp_instance):
    model, prior, sigma = exp_instance
    opts = SolverOptions(include_second_order=True)
    Y = model.apply(np.array([0.1, 0.2])) + sigma * rng.standard_normal(3)
    a = alternate(Y, sigma, prior, model, opts=opts)
    b = joint_newton(Y, sigma, prior, model)
    assert np.allclose(a.upsilon_hat.stacked(), b.upsilon_hat.stacked(),
                       atol=1e-8)


def test_solver_options_validation():
    with pytest.raises(InvalidArgument):
        SolverOptions(max_iter=0)
    with pytest.raises(InvalidArgument):
        SolverOptions(damping=0.0)
    with pytest.raises(InvalidArgument):
        SolverOptions(damping=1.5)


def test_ridge_equivalence_with_profiled_linear(rng):
    # lam = sigma^-2 and no g-prior: profiling out g halves the data weight,
    # so the f-component solves the ridge problem with doubled penalty
    p, q = 3, 5
    A = rng.standard_normal((q, p))
    half = rng.standard_normal((p, p))
    Gsq = half @ half.T + 0.4 * np.eye(p)
    sigma = 0.8
    prior = PriorSpec(f0=np.zeros(p), Gsq=Gsq, g0=np.zeros(q),
                      Gammasq=np.zeros((q, q)), lam=1.0 / sigma**2)
    model = LinearModel(A)
    Y = rng.standard_normal(q)
    fit = alternate(Y, sigma, prior, model)
    prob = LinearProblem(A=A, Gsq=Gsq, sigma=sigma, M=1.0)
    ridge = pmle_linear(Y, prob, mu=2.0)
    assert np.allclose(fit.upsilon_hat.f, ridge, atol=1e-8)


# ------------------------------------------------------- population optimum

def test_population_optimum_fixed_point(exp_instance):
    # when the prior is centered at the truth the optimum is the truth
    model, prior, sigma = exp_instance
    fstar = prior.f0
    res = population_optimum(fstar, sigma, prior, model)
    assert np.allclose(res.upsilon_hat.f, fstar, atol=1e-9)
    assert np.allclose(res.upsilon_hat.g, model.apply(fstar), atol=1e-9)


def test_population_optimum_zero_gradient(rng, exp_instance):
    model, prior, sigma = exp_instance
    fstar = np.array([0.4, -0.3])
    res = population_optimum(fstar, sigma, prior, model)
    assert res.converged
    d_f, d_g = grad(res.upsilon_hat, model.apply(fstar), sigma, prior, model)
    assert math.hypot(np.linalg.norm(d_f), np.linalg.norm(d_g)) < 1e-7


def test_population_optimum_is_expected_maximizer(rng):
    # noiseless objective at the reported optimum beats truth, prior center,
    # and random perturbations
    model, prior, sigma = random_linear_instance(rng, p=2, q=3)
    fstar = prior.f0 + np.array([1.0, -1.0])
    res = population_optimum(fstar, sigma, prior, model)
    g_star = model.apply(fstar)
    best = loglik(res.upsilon_hat, g_star, sigma, prior, model)
    for cand in (ExtendedPoint(fstar, g_star),
                 ExtendedPoint(prior.f0, model.apply(prior.f0))):
        assert best >= loglik(cand, g_star, sigma, prior, model)
    for _ in range(20):
        pert = ExtendedPoint(res.upsilon_hat.f + 0.05 * rng.standard_normal(2),
                             res.upsilon_hat.g + 0.05 * rng.standard_normal(3))
        assert best >= loglik(pert, g_star, sigma, prior, model)


# ----------------------------------------------------- concentration radius

def z_gauss_oracle(B, x):
    evals = np.linalg.eigvalsh(0.5 * (B + B.T))
    p_tr = float(evals.sum())
    v = math.sqrt(float(np.sum(evals**2)))
    lam = float(evals.max())
    return math.sqrt(p_tr + 2.0 * v * math.sqrt(x) + 2.0 * lam * x)


def assemble_information(model, prior, sigma, point):
    jac = model.jacobian(point.f)
    p, q = prior.dim_f, prior.dim_g
    fblock = prior.Gsq + prior.lam * (jac.T @ jac)
    if hasattr(model, "weighted_hessian"):
        delta = point.g - model.apply(point.f)
        fblock = fblock - prior.lam * model.weighted_hessian(point.f, delta)
    gblock = (sigma**-2 + prior.lam) * np.eye(q) + prior.Gammasq
    top = np.hstack([fblock, -prior.lam * jac.T])
    bot = np.hstack([-prior.lam * jac, gblock])
    return np.vstack([top, bot])


def test_concentration_linear_matches_oracle(rng):
    model, prior, sigma = random_linear_instance(rng, p=2, q=3)
    fstar = prior.f0 + 0.3
    star = population_optimum(fstar, sigma, prior, model).upsilon_hat
    noise = NoiseEnvelope.identity(prior.dim_g)
    report = concentration_radius(star, sigma, prior, model, noise, x=2.0)
    # independent oracle: dense inverse of the assembled information
    big = assemble_information(model, prior, sigma, star)
    gg_inv = np.linalg.inv(big)[prior.dim_f:, prior.dim_f:]
    z = z_gauss_oracle(gg_inv / sigma**2, 2.0)
    assert report.rho == 0.0
    assert np.isclose(report.z_val, z, rtol=1e-10)
    assert np.isclose(report.r_G, z, rtol=1e-10)
    assert report.delta3G == 0.0


def test_concentration_invariants_nonlinear():
    model, prior, sigma = strong_exp_instance()
    fstar = np.array([0.2, -0.1])
    star = population_optimum(fstar, sigma, prior, model).upsilon_hat
    noise = NoiseEnvelope.identity(prior.dim_g)
    report = concentration_radius(star, sigma, prior, model, noise, x=5.0)
    assert 0.0 < report.rho <= 0.5
    assert np.isclose(report.r_G, report.z_val / (1.0 - report.rho), rtol=1e-9)
    assert 3.0 * report.delta3G / report.r_G**2 <= report.rho + 1e-9
    assert report.effective_dim_p_eps > 0.0
    assert report.lambda_eps > 0.0


def test_concentration_unverifiable_weak_signal():
    # weak linear map: exponential curvature dominates the information and
    # the fixed point for rho escapes past 1/2
    model = ExpComposedModel(0.3 * np.eye(2))
    sigma = 0.5
    prior = PriorSpec(f0=np.zeros(2), Gsq=np.eye(2),
                      g0=model.apply(np.zeros(2)), Gammasq=np.eye(2),
                      lam=1.0 / sigma**2)
    star = population_optimum(np.array([0.2, -0.1]), sigma, prior,
                              model).upsilon_hat
    with pytest.raises(ConcentrationUnverifiable) as exc:
        concentration_radius(star, sigma, prior, model,
                             NoiseEnvelope.identity(2), x=5.0)
    assert exc.value.rho > 0.5
    assert exc.value.delta3 > 0.0


def test_concentration_rejects_bad_x(flat_linear_2d):
    model, prior, sigma = flat_linear_2d
    star = ExtendedPoint(np.zeros(2), np.zeros(2))
    with pytest.raises(InvalidArgument):
        concentration_radius(star, sigma, prior, model,
                             NoiseEnvelope.identity(2), x=0.0)


def test_concentration_radius_nongauss_wider(rng):
    model, prior, sigma = random_linear_instance(rng, p=2, q=3)
    star = population_optimum(prior.f0 + 0.2, sigma, prior, model).upsilon_hat
    gauss = concentration_radius(star, sigma, prior, model,
                                 NoiseEnvelope.identity(3), x=40.0)
    heavy = NoiseEnvelope(S=np.eye(3), g_exp=10.0)
    sub_exp = concentration_radius(star, sigma, prior, model, heavy, x=40.0)
    assert sub_exp.r_G >= gauss.r_G


# ----------------------------------------------------------- fisher residual

def test_fisher_residual_linear_exact(rng):
    # the quadratic case has a zero Fisher-expansion error and a zero bound
    model, prior, sigma = random_linear_instance(rng, p=2, q=3)
    fstar = prior.f0 + 0.2
    star = population_optimum(fstar, sigma, prior, model).upsilon_hat
    eps = rng.standard_normal(3)
    Y = model.apply(fstar) + sigma * eps
    hat = alternate(Y, sigma, prior, model).upsilon_hat
    res = fisher_residual(hat, star, sigma, prior, model, eps)
    assert res.lhs_sq < 1e-12
    assert res.bound == 0.0


def test_fisher_residual_nonlinear_within_bound():
    model, prior, sigma = strong_exp_instance()
    fstar = np.array([0.2, -0.1])
    star = population_optimum(fstar, sigma, prior, model).upsilon_hat
    noise = NoiseEnvelope.identity(2)
    report = concentration_radius(star, sigma, prior, model, noise, x=5.0)
    rng = np.random.default_rng(7)
    for _ in range(5):
        eps = rng.standard_normal(2)
        Y = model.apply(fstar) + sigma * eps
        hat = alternate(Y, sigma, prior, model).upsilon_hat
        res = fisher_residual(hat, star, sigma, prior, model, eps,
                              report=report)
        assert res.bound == 4.0 * report.delta3G
        assert res.lhs_sq <= res.bound


# --------------------------------------------------------- loss decomposition

def test_loss_decomposition_identity_pinned(rng, flat_linear_2d):
    # A = I, every penalty the identity: the population optimum is f*/5,
    # so the bias is 0.8 ||f*||
    model, prior, sigma = flat_linear_2d
    fstar = np.array([0.3, -0.1])
    star = population_optimum(fstar, sigma, prior, model).upsilon_hat
    assert np.allclose(star.f, fstar / 5.0, atol=1e-9)
    Y = model.apply(fstar) + sigma * rng.standard_normal(2)
    hat = alternate(Y, sigma, prior, model).upsilon_hat
    dec = loss_decomposition(np.eye(2), hat, star, fstar, sigma, prior, model)
    assert np.isclose(dec.bias, 0.8 * np.linalg.norm(fstar), atol=1e-8)
    assert np.isclose(dec.stochastic, np.linalg.norm(hat.f - star.f))
    assert dec.bound > 0.0
    assert dec.up_to_constant


def test_loss_decomposition_no_g_prior_closed_form(rng):
    # Gammasq = 0, A = I, lam = sigma^-2 = 1: profiling halves the data
    # weight, giving f*_G = (I/2 + Gsq)^-1 f*/2 and the matching bias
    p = 3
    half = rng.standard_normal((p, p))
    Gsq = half @ half.T + 0.5 * np.eye(p)
    prior = PriorSpec(f0=np.zeros(p), Gsq=Gsq, g0=np.zeros(p),
                      Gammasq=np.zeros((p, p)), lam=1.0)
    model = LinearModel(np.eye(p))
    fstar = rng.standard_normal(p)
    star = population_optimum(fstar, 1.0, prior, model).upsilon_hat
    f_pop = np.linalg.solve(0.5 * np.eye(p) + Gsq, 0.5 * fstar)
    assert np.allclose(star.f, f_pop, atol=1e-9)
    Y = fstar + np.zeros(p)
    hat = alternate(Y, 1.0, prior, model).upsilon_hat
    dec = loss_decomposition(np.eye(p), hat, star, fstar, 1.0, prior, model)
    oracle_bias = np.linalg.norm(np.linalg.solve(0.5 * np.eye(p) + Gsq,
                                                 Gsq @ fstar))
    assert np.isclose(dec.bias, oracle_bias, atol=1e-8)


def test_loss_decomposition_selection_matrix(rng, flat_linear_2d):
    model, prior, sigma = flat_linear_2d
    fstar = np.array([0.5, 0.4])
    star = population_optimum(fstar, sigma, prior, model).upsilon_hat
    hat = ExtendedPoint(star.f + np.array([0.01, -0.02]), star.g)
    Q = np.array([[1.0, 0.0]])
    dec = loss_decomposition(Q, hat, star, fstar, sigma, prior, model)
    assert np.isclose(dec.stochastic, 0.01)
    assert np.isclose(dec.bias, abs(star.f[0] - fstar[0]))
