"""Small shared numerical helpers: symmetrization, PSD checks, SPD solves."""

from __future__ import annotations

import numpy as np

#: Condition-number threshold above which an SPD solve is refused.
COND_LIMIT = 1e12


class NumericalError(RuntimeError):
    """A matrix operation failed for numerical reasons (singularity etc.)."""


class ConvergenceError(NumericalError):
    """A fixed-point iteration did not converge within its budget."""


def asmatrix(value, rows, cols, name):
    """Coerce *value* to a float64 array of shape (rows, cols) or raise."""
    arr = np.asarray(value, dtype=float)
    if arr.shape != (rows, cols):
        raise ValueError(f"{name}: expected shape {(rows, cols)}, got {arr.shape}")
    return arr


def sym(M):
    """Symmetric part (M + M^T)/2, used after every Riccati/covariance step."""
    return 0.5 * (M + M.T)


def min_symmetric_eig(M):
    return float(np.linalg.eigvalsh(sym(M)).min())


def is_psd(M, scale_tol=1e-10):
    """PSD test with relative floor: min eig >= -scale_tol * (1 + ||M||)."""
    return min_symmetric_eig(M) >= -scale_tol * (1.0 + np.linalg.norm(M))


def is_pd(M, scale_tol=1e-12):
    return min_symmetric_eig(M) > scale_tol * (1.0 + np.linalg.norm(M))


def psd_sqrt(M):
    """Symmetric PSD square root via eigendecomposition (clips tiny negatives)."""
    w, U = np.linalg.eigh(sym(M))
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.T


def chol_psd(M):
    """A factor L with L @ L.T = M for symmetric PSD M (possibly singular)."""
    w, U = np.linalg.eigh(sym(M))
    w = np.clip(w, 0.0, None)
    return U * np.sqrt(w)


def solve_spd(M, rhs, context=""):
    """Solve M x = rhs for symmetric positive-definite M.

    Refuses matrices whose condition estimate exceeds COND_LIMIT so that a
    nearly singular innovation covariance or gain Hessian surfaces as a clear
    error instead of garbage.
    """
    Ms = sym(M)
    w = np.linalg.eigvalsh(Ms)
    if w[0] <= 0.0 or w[-1] / w[0] > COND_LIMIT:
        raise NumericalError(
            f"{context or 'SPD solve'}: matrix singular or ill-conditioned "
            f"(eig range [{w[0]:.3e}, {w[-1]:.3e}])"
        )
    return np.linalg.solve(Ms, rhs)


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def frozen(arr):
    """Return a float64 copy marked read-only (value-object fields)."""
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out
