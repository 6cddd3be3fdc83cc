"""Symmetric matrix helpers: guarded eigendecompositions, roots, inverses.

All inverses in the package go through a symmetric eigendecomposition with
a relative eigenvalue floor; anything below the floor raises SingularMatrix
instead of silently regularizing.
"""

import numpy as np

from .errors import SingularMatrix

EIG_FLOOR_REL = 1e-12


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    return a


def sym_eig(m, floor_rel=EIG_FLOOR_REL, what="matrix"):
    """Eigendecomposition of a symmetric positive-definite matrix.

    m : symmetric array (p, p)
    floor_rel : eigenvalues below floor_rel * max eigenvalue are an error
    Returns (vals, vecs) with vals ascending.
    """
    m = as_matrix(m, what)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    vmax = float(vals[-1])
    if vmax <= 0.0 or float(vals[0]) < floor_rel * vmax:
        raise SingularMatrix(
            f"{what} is not positive-definite: min eigenvalue {vals[0]:.3e}"
            f" (max {vmax:.3e})",
            min_eig=float(vals[0]),
        )
    return vals, vecs


def sym_inverse(m, what="matrix"):
    vals, vecs = sym_eig(m, what=what)
    return (vecs / vals) @ vecs.T


def sym_sqrt(m, what="matrix"):
    vals, vecs = sym_eig(m, what=what)
    return (vecs * np.sqrt(vals)) @ vecs.T


def sym_inv_sqrt(m, what="matrix"):
    vals, vecs = sym_eig(m, what=what)
    return (vecs / np.sqrt(vals)) @ vecs.T


def sym_solve(m, b, what="matrix"):
    vals, vecs = sym_eig(m, what=what)
    return vecs @ ((vecs.T @ b).T / vals).T


def min_eig_sym(m):
    """Smallest eigenvalue of a symmetric matrix (no positivity demanded)."""
    m = as_matrix(m)
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


def op_norm_sym(m):
    m = as_matrix(m)
    vals = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(max(abs(vals[0]), abs(vals[-1])))


def relative_spread(b, b_breve):
    """||B^{-1/2} B_breve B^{-1/2} - I|| for symmetric positive-definite B."""
    w = sym_inv_sqrt(b, what="reference matrix")
    d = w @ as_matrix(b_breve) @ w - np.eye(b.shape[0] if hasattr(b, "shape") else 1)
    return op_norm_sym(d)


def require_spd(m, what="matrix", semi=False):
    """Validate symmetry and (semi)definiteness; returns the symmetrized array."""
    m = as_matrix(m, what)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * (1.0 + np.abs(m).max())):
        raise ValueError(f"{what} must be symmetric")
    m = 0.5 * (m + m.T)
    lo = min_eig_sym(m)
    if semi:
        if lo < -1e-10 * max(1.0, abs(lo)):
            raise SingularMatrix(f"{what} must be positive semidefinite", min_eig=lo)
    else:
        if lo <= 0.0:
            raise SingularMatrix(f"{what} must be positive-definite", min_eig=lo)
    return m
