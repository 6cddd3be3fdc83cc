"""Linear sequence-model rates, penalty selection, and ridge risk."""

import math

import numpy as np
import pytest

from calming import (
    InvalidArgument,
    LinearProblem,
    SingularMatrix,
    TruncationExceeded,
    block_regularity_check,
    minimax_mc,
    noncommutative_aj,
    pmle_linear,
    risk_bound,
    select_mu,
    sequence_rate,
)


def random_problem(rng, p=4, q=6, M=2.0):
    A = rng.standard_normal((q, p))
    half = rng.standard_normal((p, p))
    Gsq = half @ half.T + 0.5 * np.eye(p)
    return LinearProblem(A=A, Gsq=Gsq, sigma=float(rng.uniform(0.5, 2.0)), M=M)


# -------------------------------------------------------------- pmle_linear

def test_pmle_linear_normal_equations(rng):
    # oracle: dense solve of (A^T A / s^2 + mu Gsq) f = A^T Y / s^2
    for _ in range(5):
        prob = random_problem(rng)
        Y = rng.standard_normal(6)
        mu = float(rng.uniform(0.1, 5.0))
        f = pmle_linear(Y, prob, mu)
        lhs = prob.A.T @ prob.A / prob.sigma**2 + mu * prob.Gsq
        oracle = np.linalg.solve(lhs, prob.A.T @ Y / prob.sigma**2)
        assert np.allclose(f, oracle, atol=1e-10)


def test_pmle_linear_interpolates_ols(rng):
    # tiny mu with square invertible A recovers the exact solve
    A = np.array([[2.0, 0.1], [0.0, 1.5]])
    prob = LinearProblem(A=A, Gsq=np.eye(2), sigma=1.0, M=1.0)
    Y = np.array([1.0, -0.5])
    f = pmle_linear(Y, prob, mu=1e-12)
    assert np.allclose(A @ f, Y, atol=1e-9)


def test_linear_problem_validation(rng):
    with pytest.raises(SingularMatrix):
        LinearProblem(A=np.eye(2), Gsq=np.zeros((2, 2)), sigma=1.0, M=1.0)
    with pytest.raises(InvalidArgument):
        LinearProblem(A=np.eye(2), Gsq=np.eye(3), sigma=1.0, M=1.0)
    with pytest.raises(InvalidArgument):
        LinearProblem(A=np.eye(2), Gsq=np.eye(2), sigma=0.0, M=1.0)
    with pytest.raises(InvalidArgument):
        LinearProblem(A=np.eye(2), Gsq=np.eye(2), sigma=1.0, M=-1.0)
    with pytest.raises(InvalidArgument):
        LinearProblem(A=np.eye(2), Gsq=np.eye(2), sigma=1.0, M=1.0,
                      Q=np.eye(3))
    prob = LinearProblem(A=np.eye(2), Gsq=np.eye(2), sigma=1.0, M=1.0)
    with pytest.raises(InvalidArgument):
        prob.fisher(0.0)


# ---------------------------------------------------------------- select_mu

def test_select_mu_identity_pinned():
    # balance M mu / (1 + mu) = p / (1 + mu) gives mu = p / M exactly
    prob = LinearProblem(A=np.eye(4), Gsq=np.eye(4), sigma=1.0, M=2.0)
    assert abs(select_mu(prob) - 2.0) < 1e-10


def test_select_mu_balance_residual(rng):
    for _ in range(5):
        prob = random_problem(rng, M=float(rng.uniform(0.5, 4.0)))
        mu = select_mu(prob)
        inner = prob.Q @ np.linalg.solve(prob.fisher(mu), prob.Q.T)
        tr = float(np.trace(inner))
        norm = float(np.max(np.linalg.eigvalsh(0.5 * (inner + inner.T))))
        assert abs(prob.M * mu * norm - tr) <= 1e-10 * tr


def test_select_mu_decreases_in_smoothness_budget(rng):
    A = rng.standard_normal((5, 3))
    half = rng.standard_normal((3, 3))
    Gsq = half @ half.T + 0.5 * np.eye(3)
    mus = [select_mu(LinearProblem(A=A, Gsq=Gsq, sigma=1.0, M=M))
           for M in (0.5, 1.0, 4.0)]
    assert mus[0] > mus[1] > mus[2]


def test_risk_bound_formula(rng):
    prob = random_problem(rng)
    mu = 1.3
    rb = risk_bound(prob, mu)
    inner = prob.Q @ np.linalg.solve(prob.fisher(mu), prob.Q.T)
    assert np.isclose(rb.tr_Q, float(np.trace(inner)), rtol=1e-10)
    assert np.isclose(rb.bound, 3.0 * rb.tr_Q)
    assert np.isclose(rb.prob_bound, math.exp(-0.5 * prob.M * mu))


# ------------------------------------------------------------- sequence_rate

def sequence_j_oracle(s, alpha, L, M, sigma_sq):
    target = M * L / sigma_sq
    j = 1
    while j ** (1 + 2 * s + 2 * alpha) < target:
        j += 1
    return j


def test_sequence_rate_pinned():
    rep = sequence_rate(1.0, 1.0, 1.0, 1.0, 1e-5)
    assert rep.J == 10
    assert np.isclose(rep.mu, 10.0)
    assert np.isclose(rep.rate, 0.01)
    rep2 = sequence_rate(1.0, 1.0, 1.0, 1.0, 1e-6)
    assert rep2.J == 16


@pytest.mark.parametrize("s,alpha,L,M,s2", [
    (1.0, 0.5, 2.0, 1.0, 1e-4),
    (0.75, 1.5, 1.0, 3.0, 1e-5),
    (2.0, 0.0, 0.5, 0.5, 1e-6),
])
def test_sequence_rate_matches_oracle(s, alpha, L, M, s2):
    rep = sequence_rate(s, alpha, L, M, s2)
    J = sequence_j_oracle(s, alpha, L, M, s2)
    assert rep.J == J
    assert np.isclose(rep.mu, J / M)
    assert np.isclose(rep.rate, M * J ** (-2.0 * s))
    js = np.arange(1, 10_001, dtype=float)
    diag = js ** (-2 * alpha) * (L / s2) + (J / M) * js ** (2 * s)
    assert np.isclose(rep.tr_F_mu_inv, float(np.sum(1.0 / diag)), rtol=1e-12)
    assert np.isclose(rep.risk_bound, 3.0 * rep.tr_F_mu_inv)


def test_sequence_rate_smaller_noise_finer_truncation():
    js = [sequence_rate(1.0, 1.0, 1.0, 1.0, s2).J
          for s2 in (1e-4, 1e-5, 1e-6, 1e-7)]
    assert js == sorted(js)
    rates = [sequence_rate(1.0, 1.0, 1.0, 1.0, s2).rate
             for s2 in (1e-4, 1e-5, 1e-6, 1e-7)]
    assert rates == sorted(rates, reverse=True)


def test_sequence_rate_validation():
    with pytest.raises(InvalidArgument):
        sequence_rate(0.5, 1.0, 1.0, 1.0, 1e-5)
    with pytest.raises(InvalidArgument):
        sequence_rate(1.0, -0.1, 1.0, 1.0, 1e-5)
    with pytest.raises(TruncationExceeded):
        sequence_rate(1.0, 1.0, 1.0, 1.0, 1e-5, p_max=5)


# -------------------------------------------------------- noncommutative a_j

def test_noncommutative_aj_commuting_oracle():
    # diagonal A and Gsq commute: the compression picks the j smallest
    # Gsq directions, so a_j^2 is the smallest of those A^2 entries
    A = np.diag([3.0, 2.0, 1.0])
    Gsq = np.diag([1.0, 2.0, 3.0])
    for j, expected in ((1, 9.0), (2, 4.0), (3, 1.0)):
        a_sq, singular = noncommutative_aj(A, Gsq, j)
        assert np.isclose(a_sq, expected)
        assert not singular


def test_noncommutative_aj_detects_null_direction():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])  # second column dead
    Gsq = np.diag([2.0, 1.0])  # smallest prior direction is the dead one
    a_sq, singular = noncommutative_aj(A, Gsq, 1)
    assert singular and a_sq == 0.0


def test_noncommutative_aj_monotone_and_validated(rng):
    A = rng.standard_normal((5, 4))
    half = rng.standard_normal((4, 4))
    Gsq = half @ half.T + 0.3 * np.eye(4)
    vals = [noncommutative_aj(A, Gsq, j)[0] for j in range(1, 5)]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    with pytest.raises(InvalidArgument):
        noncommutative_aj(A, Gsq, 0)
    with pytest.raises(InvalidArgument):
        noncommutative_aj(A, Gsq, 5)


# --------------------------------------------------- block regularity check

def test_block_regularity_identity_is_exact():
    lower, upper, c_hat = block_regularity_check(np.eye(3), np.eye(3), 0.7, 1)
    assert np.isclose(c_hat, 1.0)
    assert abs(lower) < 1e-12 and abs(upper) < 1e-12


def test_block_regularity_certificate_holds(rng):
    # the returned C must certify C^-1 B <= F <= C B: both eigenvalue
    # margins nonnegative and the tighter one zero
    for _ in range(5):
        A = rng.standard_normal((6, 4))
        half = rng.standard_normal((4, 4))
        Gsq = half @ half.T + 0.4 * np.eye(4)
        lower, upper, c_hat = block_regularity_check(A, Gsq, 0.9, 2)
        assert c_hat >= 1.0
        assert lower >= -1e-10
        assert upper >= -1e-10
        assert min(lower, upper) < 1e-8 * c_hat


def test_block_regularity_validation():
    with pytest.raises(InvalidArgument):
        block_regularity_check(np.eye(3), np.eye(3), 1.0, 3)
    with pytest.raises(InvalidArgument):
        block_regularity_check(np.eye(3), np.eye(3), 1.0, 0)


# ---------------------------------------------------------------- minimax MC

def test_minimax_mc_risk_at_zero_matches_analytic():
    # A = Q = I, sigma = 1: the estimator is (1 + mu)^-1 Y, so the risk at
    # f = 0 is p / (1 + mu)^2
    prob = LinearProblem(A=np.eye(3), Gsq=np.eye(3), sigma=1.0, M=1.0)
    mu = 0.5
    summary = minimax_mc(prob, mu, n_rep=4_000, seed=0)
    analytic = 3.0 / (1.0 + mu) ** 2
    assert np.isclose(summary.risk_at_zero, analytic, rtol=0.1)
    assert summary.worst_risk >= summary.risk_at_zero


def test_minimax_mc_within_risk_bound(rng):
    prob = random_problem(rng)
    mu = select_mu(prob)
    summary = minimax_mc(prob, mu, n_rep=2_000, seed=3)
    # the worst empirical risk over boundary functions respects the bound
    assert summary.worst_risk <= risk_bound(prob, mu).bound * 1.1
    assert summary.per_function.min() >= 0.0


def test_minimax_mc_validation():
    prob = LinearProblem(A=np.eye(2), Gsq=np.eye(2), sigma=1.0, M=1.0)
    with pytest.raises(InvalidArgument):
        minimax_mc(prob, 1.0, n_rep=50, seed=0)
