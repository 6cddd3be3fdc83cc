"""Extended-parameter likelihood for the calming relaxation.

The structural equation g = A(f) is replaced by a quadratic penalty with
weight lam, so the objective over the extended point v = (f, g) is

    L(v) = -||Y - g||^2 / (2 sigma^2) - lam/2 ||g - A(f)||^2
           - 1/2 (f - f0)' Gsq (f - f0) - 1/2 (g - g0)' Gammasq (g - g0).

Data enter linearly through g; all nonlinearity sits in the penalty term.
This module provides L, its gradient, the block information matrix (the
negative Hessian), its linearized "breve" variant, Schur-complement block
inversion, prior coordination between Gsq and Gammasq, and the diagnostic
checks used by the theory.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidArgument, NumericOverflow
from .forward import ForwardModel
from .linalg import min_eig_sym, require_spd, sym_inverse, sym_solve

__all__ = [
    "PriorSpec",
    "ExtendedPoint",
    "Elasticity",
    "HessianBlocks",
    "InverseBlocks",
    "NoiseEnvelope",
    "GgCondition",
    "loglik",
    "grad",
    "hessian_blocks",
    "breve_hessian",
    "invert_blocks",
    "coordinate_gamma",
    "check_gg_condition",
    "block_sandwich_check",
]


@dataclass(frozen=True)
class PriorSpec:
    """Double Gaussian prior plus structural weight.

    f0, Gsq : mean and precision of the f-prior (Gsq symmetric positive-definite)
    g0, Gammasq : mean and precision of the g-prior (Gammasq positive-semidefinite)
    lam : structural penalty weight, > 0
    """

    f0: np.ndarray
    Gsq: np.ndarray
    g0: np.ndarray
    Gammasq: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "f0", np.asarray(self.f0, dtype=float).reshape(-1))
        object.__setattr__(self, "g0", np.asarray(self.g0, dtype=float).reshape(-1))
        gsq = require_spd(self.Gsq, "Gsq")
        gam = require_spd(self.Gammasq, "Gammasq", semi=True)
        object.__setattr__(self, "Gsq", gsq)
        object.__setattr__(self, "Gammasq", gam)
        object.__setattr__(self, "lam", float(self.lam))
        if not self.lam > 0:
            raise InvalidArgument("structural weight lam must be positive")
        if gsq.shape[0] != self.f0.shape[0]:
            raise DimensionMismatch("Gsq and f0 disagree on dimension")
        if gam.shape[0] != self.g0.shape[0]:
            raise DimensionMismatch("Gammasq and g0 disagree on dimension")

    @property
    def dim_f(self):
        return self.f0.shape[0]

    @property
    def dim_g(self):
        return self.g0.shape[0]


@dataclass(frozen=True)
class ExtendedPoint:
    """The extended parameter v = (f, g)."""

    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).reshape(-1))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float).reshape(-1))
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.g))):
            raise DimensionMismatch("extended point has non-finite entries")

    def stacked(self):
        return np.concatenate([self.f, self.g])

    @classmethod
    def from_stacked(cls, x, p):
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(x[:p], x[p:])


@dataclass(frozen=True)
class Elasticity:
    """Violation of the structural equation, delta = g - A(f)."""

    delta: np.ndarray

    @classmethod
    def at(cls, point: ExtendedPoint, model: ForwardModel):
        return cls(delta=point.g - model.apply(point.f))

    @property
    def norm(self):
        return float(np.linalg.norm(self.delta))


@dataclass(frozen=True)
class HessianBlocks:
    """Blocks of the information matrix (negative Hessian of L).

    Fblock : (p, p) f-block
    cross : (q, p) lam * Jacobian; enters the assembled matrix with a minus
    Gblock : (q, q) g-block, constant in v
    penalized : whether the prior precisions Gsq, Gammasq are included
    """

    Fblock: np.ndarray
    cross: np.ndarray
    Gblock: np.ndarray
    penalized: bool = True

    @property
    def dim_f(self):
        return self.Fblock.shape[0]

    @property
    def dim_g(self):
        return self.Gblock.shape[0]

    def assembled(self):
        p, q = self.dim_f, self.dim_g
        out = np.zeros((p + q, p + q))
        out[:p, :p] = self.Fblock
        out[p:, p:] = self.Gblock
        out[:p, p:] = -self.cross.T
        out[p:, :p] = -self.cross
        return out


@dataclass(frozen=True)
class InverseBlocks:
    """Blocks of the inverse information matrix."""

    ff_inv: np.ndarray
    gg_inv: np.ndarray
    fg: np.ndarray

    def assembled(self):
        p = self.ff_inv.shape[0]
        q = self.gg_inv.shape[0]
        out = np.zeros((p + q, p + q))
        out[:p, :p] = self.ff_inv
        out[p:, p:] = self.gg_inv
        out[:p, p:] = self.fg
        out[p:, :p] = self.fg.T
        return out


@dataclass(frozen=True)
class NoiseEnvelope:
    """Noise description: Var(eps) <= S^2, exponential-moment radius, norm cap.

    S : (q, q) symmetric positive-definite envelope of the noise covariance root
    g_exp : exponential-moment radius (np.inf for Gaussian-type tails)
    nu0 : moment constant, >= 1
    """

    S: np.ndarray
    g_exp: float = np.inf
    nu0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "S", require_spd(self.S, "noise envelope S"))
        object.__setattr__(self, "g_exp", float(self.g_exp))
        object.__setattr__(self, "nu0", float(self.nu0))
        if not self.g_exp > 0:
            raise InvalidArgument("g_exp must be positive (or infinite)")
        if self.nu0 < 1.0:
            raise InvalidArgument("nu0 must be at least 1")

    @classmethod
    def identity(cls, q, g_exp=np.inf, nu0=1.0):
        return cls(S=np.eye(q), g_exp=g_exp, nu0=nu0)


def _validate(point, Y, sigma, prior, model):
    if point.f.shape[0] != model.dim_in:
        raise DimensionMismatch(
            f"f has length {point.f.shape[0]}, model expects {model.dim_in}"
        )
    if point.g.shape[0] != model.dim_out:
        raise DimensionMismatch(
            f"g has length {point.g.shape[0]}, model expects {model.dim_out}"
        )
    if prior.dim_f != model.dim_in or prior.dim_g != model.dim_out:
        raise DimensionMismatch("prior dimensions disagree with the model")
    if Y is not None:
        Y = np.asarray(Y, dtype=float).reshape(-1)
        if Y.shape[0] != model.dim_out:
            raise DimensionMismatch(
                f"data has length {Y.shape[0]}, model expects {model.dim_out}"
            )
    if not sigma > 0:
        raise InvalidArgument("sigma must be positive")
    return Y


def loglik(point: ExtendedPoint, Y, sigma, prior: PriorSpec, model: ForwardModel):
    """Penalized log-likelihood L(v) at the extended point v = (f, g)."""
    Y = _validate(point, Y, sigma, prior, model)
    delta = point.g - model.apply(point.f)
    df = point.f - prior.f0
    dg = point.g - prior.g0
    val = (
        -0.5 * float((Y - point.g) @ (Y - point.g)) / sigma**2
        - 0.5 * prior.lam * float(delta @ delta)
        - 0.5 * float(df @ (prior.Gsq @ df))
        - 0.5 * float(dg @ (prior.Gammasq @ dg))
    )
    if not np.isfinite(val):
        raise NumericOverflow("log-likelihood evaluated to a non-finite value")
    return val


def grad(point: ExtendedPoint, Y, sigma, prior: PriorSpec, model: ForwardModel):
    """Gradient of L; returns (df, dg)."""
    Y = _validate(point, Y, sigma, prior, model)
    resid = model.apply(point.f) - point.g
    jac = model.jacobian(point.f)
    d_f = -prior.lam * (jac.T @ resid) - prior.Gsq @ (point.f - prior.f0)
    d_g = (
        (Y - point.g) / sigma**2
        + prior.lam * resid
        - prior.Gammasq @ (point.g - prior.g0)
    )
    return d_f, d_g


def hessian_blocks(
    point: ExtendedPoint,
    sigma,
    prior: PriorSpec,
    model: ForwardModel,
    penalized: bool = True,
):
    """Information-matrix blocks at v.

    Fblock = [Gsq] + lam (J'J - sum_k delta_k Hess A_k)  with delta = g - A(f)
    cross  = lam J
    Gblock = [Gammasq] + (sigma^-2 + lam) I_q
    The bracketed prior terms appear only when penalized is true.
    """
    _validate(point, None, sigma, prior, model)
    jac = model.jacobian(point.f)
    delta = point.g - model.apply(point.f)
    fblock = prior.lam * (jac.T @ jac - model.weighted_hessian(point.f, delta))
    gblock = (1.0 / sigma**2 + prior.lam) * np.eye(model.dim_out)
    if penalized:
        fblock = fblock + prior.Gsq
        gblock = gblock + prior.Gammasq
    return HessianBlocks(
        Fblock=0.5 * (fblock + fblock.T),
        cross=prior.lam * jac,
        Gblock=gblock,
        penalized=penalized,
    )


def breve_hessian(f, sigma, prior: PriorSpec, model: ForwardModel, penalized: bool = True):
    """Linearized information blocks: the elasticity term is dropped."""
    point = ExtendedPoint(f=f, g=model.apply(np.asarray(f, dtype=float).reshape(-1)))
    _validate(point, None, sigma, prior, model)
    jac = model.jacobian(point.f)
    fblock = prior.lam * (jac.T @ jac)
    gblock = (1.0 / sigma**2 + prior.lam) * np.eye(model.dim_out)
    if penalized:
        fblock = fblock + prior.Gsq
        gblock = gblock + prior.Gammasq
    return HessianBlocks(
        Fblock=0.5 * (fblock + fblock.T),
        cross=prior.lam * jac,
        Gblock=gblock,
        penalized=penalized,
    )


def invert_blocks(h: HessianBlocks) -> InverseBlocks:
    """Blockwise inverse of the assembled information matrix.

    Uses the Schur complement of the g-block:
        ff_inv = (Fblock - cross' Gblock^-1 cross)^-1
        fg     = ff_inv cross' Gblock^-1
        gg_inv = Gblock^-1 + Gblock^-1 cross ff_inv cross' Gblock^-1
    Raises SingularMatrix (with the minimum eigenvalue) if the assembled
    matrix is not positive-definite.
    """
    g_inv = sym_inverse(h.Gblock, what="g-block")
    schur = h.Fblock - h.cross.T @ g_inv @ h.cross
    ff_inv = sym_inverse(schur, what="f-block Schur complement")
    fg = ff_inv @ h.cross.T @ g_inv
    gg_inv = g_inv + g_inv @ h.cross @ ff_inv @ h.cross.T @ g_inv
    return InverseBlocks(
        ff_inv=0.5 * (ff_inv + ff_inv.T),
        gg_inv=0.5 * (gg_inv + gg_inv.T),
        fg=fg,
    )


def coordinate_gamma(model: ForwardModel, f0, Gsq, mode):
    """Coordinate the g-prior precision with the f-prior.

    mode "pushforward": Gammasq = J Gsq J' with J the Jacobian at f0.
    mode "linear_pullback": Gammasq = J^-T Gsq J^-1, so J' Gammasq J = Gsq
    (square invertible Jacobian required).
    """
    f0 = np.asarray(f0, dtype=float).reshape(-1)
    gsq = require_spd(Gsq, "Gsq")
    jac = model.jacobian(f0)
    if mode == "pushforward":
        out = jac @ gsq @ jac.T
        return 0.5 * (out + out.T)
    if mode == "linear_pullback":
        if jac.shape[0] != jac.shape[1]:
            raise InvalidArgument(
                "linear_pullback needs a square Jacobian, got shape "
                f"{jac.shape}"
            )
        svals = np.linalg.svd(jac, compute_uv=False)
        if svals[-1] < 1e-12 * svals[0]:
            from .errors import SingularMatrix

            raise SingularMatrix(
                "Jacobian is numerically singular in linear_pullback",
                min_eig=float(svals[-1]),
            )
        jinv = np.linalg.inv(jac)
        out = jinv.T @ gsq @ jinv
        return 0.5 * (out + out.T)
    raise InvalidArgument(f"unknown coordination mode {mode!r}")


@dataclass(frozen=True)
class GgCondition:
    """Both sides of the prior-coordination inequalities and the best constant."""

    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float
    C_hat: float = field(default=np.inf)


def _ratio(lhs, rhs):
    if lhs <= 0.0:
        return 0.0
    if rhs <= 0.0:
        return np.inf
    return lhs / rhs


def check_gg_condition(model: ForwardModel, fstar, prior: PriorSpec, sigma):
    """Diagnostic for the compatibility of the two prior precisions.

    Checks, at the true point f*,
        ||Gamma (A(f*) - g0)||^2 <= C ||G (f* - f0)||^2
        tr (sigma^2 Gammasq + I)^-1 <= C tr(Fblock^-1 F)
    and returns both sides of each plus the smallest C making both hold.
    Requires g0 = A(f0).
    """
    fstar = np.asarray(fstar, dtype=float).reshape(-1)
    a_f0 = model.apply(prior.f0)
    if np.linalg.norm(prior.g0 - a_f0) > 1e-8 * (1.0 + np.linalg.norm(prior.g0)):
        raise InvalidArgument("check_gg_condition requires g0 = A(f0)")
    resid_g = model.apply(fstar) - prior.g0
    resid_f = fstar - prior.f0
    lhs1 = float(resid_g @ (prior.Gammasq @ resid_g))
    rhs1 = float(resid_f @ (prior.Gsq @ resid_f))

    q = model.dim_out
    lhs2 = float(np.trace(sym_inverse(sigma**2 * prior.Gammasq + np.eye(q))))
    point = ExtendedPoint(f=fstar, g=model.apply(fstar))
    pen = hessian_blocks(point, sigma, prior, model, penalized=True)
    unpen = hessian_blocks(point, sigma, prior, model, penalized=False)
    rhs2 = float(np.trace(sym_solve(pen.Fblock, unpen.Fblock, what="f-block")))

    c_hat = max(_ratio(lhs1, rhs1), _ratio(lhs2, rhs2))
    return GgCondition(lhs1=lhs1, rhs1=rhs1, lhs2=lhs2, rhs2=rhs2, C_hat=c_hat)


def block_sandwich_check(model: ForwardModel, prior: PriorSpec, sigma):
    """Eigenvalue margins of the factor-2 sandwich on the inverse information.

    For a linear model with lam = sigma^-2 and positive-definite priors,
    each diagonal block of the inverse assembled information is sandwiched
    between 1/2 and 2 times the inverse of the corresponding block:

        (1/2) Fblock^-1 <= (IF^-1)_ff <= 2 Fblock^-1
        (1/2) Gblock^-1 <= (IF^-1)_gg <= 2 Gblock^-1

    The bound is per diagonal block; the same factors applied to the full
    matrix against block-diag(Fblock^-1, Gblock^-1) can fail, because the
    coupling block lam*J can carry operator norm up to 1/sqrt(2) in the
    block geometry, which caps the valid full-matrix factor at 2 + sqrt(2).
    Returns (min lower margin, min upper margin) over the two blocks.
    """
    if not model.is_linear:
        raise InvalidArgument("block sandwich bound applies to linear models only")
    if abs(prior.lam - 1.0 / sigma**2) > 1e-9 * prior.lam:
        raise InvalidArgument("block sandwich bound requires lam = sigma^-2")
    if min_eig_sym(prior.Gammasq) <= 0.0:
        raise InvalidArgument("block sandwich bound requires positive-definite Gammasq")
    point = ExtendedPoint(f=prior.f0, g=model.apply(prior.f0))
    blocks = hessian_blocks(point, sigma, prior, model, penalized=True)
    inv = invert_blocks(blocks)
    f_inv = sym_inverse(blocks.Fblock, what="f-block")
    g_inv = sym_inverse(blocks.Gblock, what="g-block")
    lower = min(min_eig_sym(inv.ff_inv - 0.5 * f_inv),
                min_eig_sym(inv.gg_inv - 0.5 * g_inv))
    upper = min(min_eig_sym(2.0 * f_inv - inv.ff_inv),
                min_eig_sym(2.0 * g_inv - inv.gg_inv))
    return lower, upper
