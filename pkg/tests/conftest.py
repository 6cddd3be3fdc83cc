"""Shared fixtures and independent numerical oracles.

The oracles recompute quantities by a route different from the library:
finite differences for derivatives, dense solves for block algebra, Monte
Carlo for tail probabilities. Tests compare library output against these,
never against constants copied out of the implementation.
"""

import numpy as np
import pytest

from calming import ExtendedPoint, LinearModel, ExpComposedModel, PriorSpec, loglik


def fd_gradient(fun, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def fd_jacobian(fun, x, h=1e-7):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def loglik_of_stacked(Y, sigma, prior, model):
    """The extended objective as a plain function of the stacked vector."""
    p = prior.dim_f

    def fun(x):
        return loglik(ExtendedPoint(x[:p], x[p:]), Y, sigma, prior, model)

    return fun


def random_linear_instance(rng, p=None, q=None, lam_is_inv_sigma_sq=True):
    """A well-conditioned random linear model with Gaussian priors."""
    p = p or int(rng.integers(1, 5))
    q = q or int(rng.integers(p, p + 4))
    A = rng.standard_normal((q, p))
    gsq_half = rng.standard_normal((p, p)) / np.sqrt(p)
    Gsq = gsq_half @ gsq_half.T + 0.3 * np.eye(p)
    gam_half = rng.standard_normal((q, q)) / np.sqrt(q)
    Gammasq = gam_half @ gam_half.T + 0.2 * np.eye(q)
    sigma = float(rng.uniform(0.5, 2.0))
    lam = 1.0 / sigma**2 if lam_is_inv_sigma_sq else float(rng.uniform(0.3, 3.0))
    prior = PriorSpec(f0=rng.standard_normal(p), Gsq=Gsq,
                      g0=rng.standard_normal(q), Gammasq=Gammasq, lam=lam)
    return LinearModel(A), prior, sigma


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def tiny_linear():
    """The hand-checkable p = q = 1 instance with every scale equal to one."""
    model = LinearModel(np.array([[1.0]]))
    prior = PriorSpec(f0=np.zeros(1), Gsq=np.eye(1), g0=np.zeros(1),
                      Gammasq=np.eye(1), lam=1.0)
    return model, prior, 1.0


@pytest.fixture
def flat_linear_2d():
    """p = q = 2 identity instance used by the exact-recovery checks."""
    model = LinearModel(np.eye(2))
    prior = PriorSpec(f0=np.zeros(2), Gsq=np.eye(2), g0=np.zeros(2),
                      Gammasq=np.eye(2), lam=1.0)
    return model, prior, 1.0


@pytest.fixture
def exp_instance():
    """Mildly nonlinear exponential-composition instance."""
    K = np.array([[0.8, 0.2], [0.1, 0.6], [0.3, -0.2]])
    model = ExpComposedModel(K)
    prior = PriorSpec(f0=np.zeros(2), Gsq=np.eye(2),
                      g0=model.apply(np.zeros(2)), Gammasq=0.5 * np.eye(3),
                      lam=2.0)
    return model, prior, 0.7
