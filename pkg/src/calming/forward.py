"""Forward operators A: R^p -> R^q with exact directional derivatives.

Every model exposes the value A(f), the Jacobian, directional derivatives
d^m/dt^m A(f + t a) at t=0 for m = 1..4, and a weighted output Hessian
sum_k w_k Hess A_k(f). Derivative order is capped at 4; higher orders are
an error rather than a silent zero.
"""

import numpy as np

from .errors import DimensionMismatch, InvalidArgument, NumericOverflow

_MAX_ORDER = 4

# central stencils for d^m/dt^m at t=0: (offsets, weights, h-power)
_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5), 1),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0), 2),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5), 3),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0), 4),
}

_DEFAULT_FD_STEP = {1: 1e-6, 2: 1e-4, 3: 1e-2, 4: 1e-2}


def _check_order(m):
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= _MAX_ORDER:
        raise InvalidArgument(f"derivative order must be an integer in 1..{_MAX_ORDER}, got {m}")


def _check_finite_output(y, what="forward map output"):
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise NumericOverflow(
            f"{what} is non-finite at index {int(bad[0])}", index=int(bad[0])
        )
    return y


class ForwardModel:
    """Interface. Subclasses set dim_in, dim_out and implement the maps."""

    dim_in = 0
    dim_out = 0
    is_linear = False

    def _coerce_point(self, f):
        f = np.asarray(f, dtype=float).reshape(-1)
        if f.shape[0] != self.dim_in:
            raise DimensionMismatch(
                f"point has length {f.shape[0]}, model expects {self.dim_in}"
            )
        if not np.all(np.isfinite(f)):
            raise DimensionMismatch("point has non-finite entries")
        return f

    def apply(self, f):
        raise NotImplementedError

    def jacobian(self, f):
        raise NotImplementedError

    def dir_deriv(self, f, alpha, m):
        raise NotImplementedError

    def apply_batch(self, fs):
        """A(f) for each row of fs (n, p); default loops, subclasses vectorize."""
        fs = np.asarray(fs, dtype=float)
        return np.stack([self.apply(f) for f in fs])

    def dir_deriv_batch(self, f, alphas, m):
        """dir_deriv at one point f for each direction row of alphas (n, p)."""
        alphas = np.asarray(alphas, dtype=float)
        return np.stack([self.dir_deriv(f, a, m) for a in alphas])

    def weighted_hessian(self, f, w):
        """sum_k w_k Hess A_k(f) as a (p, p) matrix.

        Assembled from second directional derivatives by polarization:
        Hess(a, b) = ( d2_{a+b} - d2_{a-b} ) / 4.
        """
        f = self._coerce_point(f)
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] != self.dim_out:
            raise DimensionMismatch(
                f"weight vector has length {w.shape[0]}, expected {self.dim_out}"
            )
        p = self.dim_in
        h = np.zeros((p, p))
        eye = np.eye(p)
        for i in range(p):
            for j in range(i, p):
                plus = self.dir_deriv(f, eye[i] + eye[j], 2)
                minus = self.dir_deriv(f, eye[i] - eye[j], 2)
                val = 0.25 * (w @ plus - w @ minus)
                h[i, j] = val
                h[j, i] = val
        return h

    def fd_check(self, f, alpha, m, h=None):
        """Relative discrepancy between dir_deriv and a central stencil.

        Uses one Richardson refinement for m in {3, 4}. Returns
        ||fd - exact|| / (1 + ||exact||).
        """
        _check_order(m)
        f = self._coerce_point(f)
        alpha = np.asarray(alpha, dtype=float).reshape(-1)
        if h is None:
            h = _DEFAULT_FD_STEP[m]
        if not h > 0:
            raise InvalidArgument("finite-difference step must be positive")
        exact = self.dir_deriv(f, alpha, m)
        fd = self._fd_stencil(f, alpha, m, h)
        if m >= 3:
            fine = self._fd_stencil(f, alpha, m, 0.5 * h)
            fd = (4.0 * fine - fd) / 3.0
        return float(np.linalg.norm(fd - exact) / (1.0 + np.linalg.norm(exact)))

    def _fd_stencil(self, f, alpha, m, h):
        offsets, weights, power = _STENCILS[m]
        acc = np.zeros(self.dim_out)
        for off, wgt in zip(offsets, weights):
            acc += wgt * self.apply(f + (off * h) * alpha)
        return acc / h**power


class LinearModel(ForwardModel):
    """A(f) = M f for a dense (q, p) matrix M."""

    is_linear = True

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim == 1:
            m = m.reshape(1, -1)
        if m.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-dimensional, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DimensionMismatch("matrix has non-finite entries")
        self.matrix = m
        self.dim_out, self.dim_in = m.shape

    def apply(self, f):
        f = self._coerce_point(f)
        return _check_finite_output(self.matrix @ f)

    def jacobian(self, f):
        self._coerce_point(f)
        return self.matrix.copy()

    def dir_deriv(self, f, alpha, m):
        _check_order(m)
        f = self._coerce_point(f)
        alpha = np.asarray(alpha, dtype=float).reshape(-1)
        if alpha.shape[0] != self.dim_in:
            raise DimensionMismatch("direction length mismatch")
        if m == 1:
            return self.matrix @ alpha
        return np.zeros(self.dim_out)

    def apply_batch(self, fs):
        return np.asarray(fs, dtype=float) @ self.matrix.T

    def dir_deriv_batch(self, f, alphas, m):
        _check_order(m)
        alphas = np.asarray(alphas, dtype=float)
        if m == 1:
            return alphas @ self.matrix.T
        return np.zeros((alphas.shape[0], self.dim_out))

    def weighted_hessian(self, f, w):
        self._coerce_point(f)
        return np.zeros((self.dim_in, self.dim_in))


class DiagonalPowerModel(LinearModel):
    """Diagonal sequence-space operator diag(a_j), a_j^2 = L j^{-2 alpha}."""

    def __init__(self, p, L, alpha):
        if p < 1:
            raise InvalidArgument("p must be a positive integer")
        if L <= 0:
            raise InvalidArgument("amplitude L must be positive")
        if alpha < 0:
            raise InvalidArgument("decay exponent alpha must be nonnegative")
        j = np.arange(1, p + 1, dtype=float)
        self.singular_values = np.sqrt(L) * j ** (-alpha)
        super().__init__(np.diag(self.singular_values))
        self.L = float(L)
        self.alpha = float(alpha)


class ExpComposedModel(ForwardModel):
    """A(f) = K exp(f) componentwise; all directional derivatives closed form."""

    is_linear = False

    def __init__(self, K):
        k = np.asarray(K, dtype=float)
        if k.ndim == 1:
            k = k.reshape(1, -1)
        if k.ndim != 2:
            raise DimensionMismatch(f"K must be 2-dimensional, got shape {k.shape}")
        if not np.all(np.isfinite(k)):
            raise DimensionMismatch("K has non-finite entries")
        self.K = k
        self.dim_out, self.dim_in = k.shape

    def apply(self, f):
        f = self._coerce_point(f)
        with np.errstate(over="ignore"):
            y = self.K @ np.exp(f)
        return _check_finite_output(y)

    def jacobian(self, f):
        f = self._coerce_point(f)
        return self.K * np.exp(f)[None, :]

    def dir_deriv(self, f, alpha, m):
        # d^m/dt^m K exp(f + t a) = K (a^m * exp(f)) componentwise
        _check_order(m)
        f = self._coerce_point(f)
        alpha = np.asarray(alpha, dtype=float).reshape(-1)
        if alpha.shape[0] != self.dim_in:
            raise DimensionMismatch("direction length mismatch")
        with np.errstate(over="ignore"):
            y = self.K @ (alpha**m * np.exp(f))
        return _check_finite_output(y, what="directional derivative")

    def apply_batch(self, fs):
        with np.errstate(over="ignore"):
            y = np.exp(np.asarray(fs, dtype=float)) @ self.K.T
        return _check_finite_output(y.reshape(-1), what="forward map output").reshape(y.shape)

    def dir_deriv_batch(self, f, alphas, m):
        _check_order(m)
        f = np.asarray(f, dtype=float)
        alphas = np.asarray(alphas, dtype=float)
        with np.errstate(over="ignore"):
            y = (alphas**m * np.exp(f)) @ self.K.T
        return y

    def weighted_hessian(self, f, w):
        f = self._coerce_point(f)
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape[0] != self.dim_out:
            raise DimensionMismatch("weight vector length mismatch")
        return np.diag((self.K.T @ w) * np.exp(f))
