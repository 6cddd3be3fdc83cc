"""Forward-map oracles: analytic derivatives against finite differences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calming import (
    DiagonalPowerModel,
    DimensionMismatch,
    ExpComposedModel,
    InvalidArgument,
    LinearModel,
    NumericOverflow,
)
from conftest import fd_jacobian


def models_for_test():
    rng = np.random.default_rng(7)
    return [
        LinearModel(rng.standard_normal((4, 3))),
        DiagonalPowerModel(4, 1.5, 0.8),
        ExpComposedModel(rng.standard_normal((3, 2)) * 0.6),
    ]


@pytest.mark.parametrize("model", models_for_test())
def test_jacobian_matches_finite_differences(model):
    rng = np.random.default_rng(11)
    for _ in range(5):
        f = rng.standard_normal(model.dim_in) * 0.5
        jac = model.jacobian(f)
        jac_fd = fd_jacobian(model.apply, f)
        assert np.allclose(jac, jac_fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("model", models_for_test())
@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_dir_deriv_matches_fd_along_line(model, m):
    rng = np.random.default_rng(23 + m)
    f = rng.standard_normal(model.dim_in) * 0.3
    alpha = rng.standard_normal(model.dim_in)
    alpha /= np.linalg.norm(alpha)

    # oracle: m-th derivative of t -> A(f + t alpha) by central differences
    h = 1e-2 if m >= 3 else 1e-5
    ts = {1: [(-1, -0.5), (1, 0.5)],
          2: [(-1, 1.0), (0, -2.0), (1, 1.0)],
          3: [(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
          4: [(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)]}[m]
    acc = sum(w * model.apply(f + k * h * alpha) for k, w in ts)
    oracle = acc / h**m

    got = model.dir_deriv(f, alpha, m)
    assert np.allclose(got, oracle, rtol=5e-4, atol=5e-4)


@pytest.mark.parametrize("model", models_for_test())
def test_dir_deriv_batch_agrees_with_loop(model):
    rng = np.random.default_rng(5)
    f = rng.standard_normal(model.dim_in) * 0.4
    alphas = rng.standard_normal((6, model.dim_in))
    for m in (1, 2, 3):
        batch = model.dir_deriv_batch(f, alphas, m)
        loop = np.stack([model.dir_deriv(f, a, m) for a in alphas])
        assert np.allclose(batch, loop, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("model", models_for_test())
def test_apply_batch_agrees_with_loop(model):
    rng = np.random.default_rng(6)
    fs = rng.standard_normal((5, model.dim_in)) * 0.4
    batch = model.apply_batch(fs)
    loop = np.stack([model.apply(f) for f in fs])
    assert np.allclose(batch, loop, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("model", models_for_test())
def test_weighted_hessian_matches_fd_of_jacobian(model):
    rng = np.random.default_rng(13)
    f = rng.standard_normal(model.dim_in) * 0.3
    w = rng.standard_normal(model.dim_out)

    # oracle: sum_k w_k * Hessian(A_k) via differentiating the Jacobian
    h = 1e-5
    p = model.dim_in
    oracle = np.zeros((p, p))
    for i in range(p):
        e = np.zeros(p)
        e[i] = h
        oracle[i] = w @ (model.jacobian(f + e) - model.jacobian(f - e)) / (2 * h)
    oracle = 0.5 * (oracle + oracle.T)

    got = model.weighted_hessian(f, w)
    assert np.allclose(got, oracle, rtol=1e-5, atol=1e-6)
    assert np.allclose(got, got.T)


def test_linear_weighted_hessian_is_zero():
    model = LinearModel(np.array([[2.0, 1.0], [0.0, 3.0]]))
    assert np.allclose(model.weighted_hessian(np.ones(2), np.ones(2)), 0.0)


def test_fd_check_reports_small_error_on_smooth_map():
    model = ExpComposedModel(np.array([[0.5, 0.1], [0.2, 0.4]]))
    rng = np.random.default_rng(3)
    f = rng.standard_normal(2) * 0.2
    alpha = rng.standard_normal(2)
    for m in (1, 2, 3, 4):
        err = model.fd_check(f, alpha, m)
        assert err < 1e-4


def test_diagonal_power_singular_values():
    p, L, alpha = 5, 2.0, 1.5
    model = DiagonalPowerModel(p, L, alpha)
    # oracle: definition a_j = sqrt(L) j^{-alpha}
    expected = np.sqrt(L) * (np.arange(1, p + 1) ** -alpha)
    assert np.allclose(model.singular_values, expected)
    assert np.allclose(model.matrix, np.diag(expected))


def test_exp_composed_overflow_raises():
    model = ExpComposedModel(np.array([[1.0]]))
    with pytest.raises(NumericOverflow):
        model.apply(np.array([1e4]))


def test_dimension_mismatch():
    model = LinearModel(np.eye(3))
    with pytest.raises(DimensionMismatch):
        model.apply(np.ones(2))


def test_invalid_order_rejected():
    model = LinearModel(np.eye(2))
    with pytest.raises(InvalidArgument):
        model.dir_deriv(np.ones(2), np.ones(2), 0)
    with pytest.raises(InvalidArgument):
        model.dir_deriv(np.ones(2), np.ones(2), 5)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 4.0), st.floats(0.0, 2.0))
def test_diagonal_power_jacobian_is_constant(p, L, alpha):
    model = DiagonalPowerModel(p, L, alpha)
    rng = np.random.default_rng(1)
    f1, f2 = rng.standard_normal((2, p))
    assert np.allclose(model.jacobian(f1), model.jacobian(f2))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_exp_composed_higher_orders_scale_with_direction(a0, a1):
    # m-th directional derivative is m-homogeneous in the direction
    model = ExpComposedModel(np.array([[0.4, 0.1], [0.0, 0.3]]))
    f = np.array([0.1, -0.2])
    alpha = np.array([a0, a1])
    for m in (1, 2, 3):
        d1 = model.dir_deriv(f, 2.0 * alpha, m)
        d2 = (2.0**m) * model.dir_deriv(f, alpha, m)
        assert np.allclose(d1, d2, rtol=1e-10, atol=1e-12)
