"""Small dense matrix helpers used by the stability analysis and the implicit solvers."""

from __future__ import annotations

import numpy as np
from scipy import linalg

# reciprocal 1-norm condition number below which a solve is refused
RCOND_MIN = 1e-13


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is singular or too ill-conditioned to solve against."""


class EigenError(np.linalg.LinAlgError):
    """Raised when the eigenvalue solver does not converge."""


def _square(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def kron(a, b) -> np.ndarray:
    """Kronecker product; block (i, j) of the result is a[i, j] * b."""
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def vec(a) -> np.ndarray:
    """Stack the columns of ``a`` into a single column vector."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return a.reshape(-1, order="F")[:, None]


def unvec(v, rows: int) -> np.ndarray:
    """Inverse of :func:`vec` for a matrix with ``rows`` rows."""
    v = np.asarray(v, dtype=float).reshape(-1)
    return v.reshape(rows, -1, order="F")


def eigenvalues(a) -> np.ndarray:
    a = _square(a)
    if not np.all(np.isfinite(a)):
        raise EigenError("matrix has non-finite entries")
    try:
        return linalg.eigvals(a)
    except linalg.LinAlgError as exc:
        raise EigenError(f"eigenvalue solver failed: {exc}") from exc


def spectral_radius(a) -> float:
    """Largest eigenvalue modulus."""
    return float(np.max(np.abs(eigenvalues(a))))


def spectral_abscissa(a) -> float:
    """Largest real part of the eigenvalues."""
    return float(np.max(eigenvalues(a).real))


def rcond(a) -> float:
    """Reciprocal 1-norm condition number (0 for singular matrices)."""
    a = _square(a)
    with np.errstate(all="ignore"):
        c = np.linalg.cond(a, 1)
    if not np.isfinite(c) or c == 0:
        return 0.0
    return float(1.0 / c)


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a @ x = b``, refusing near-singular ``a``."""
    a = _square(a)
    rc = rcond(a)
    if rc < RCOND_MIN:
        raise SingularMatrixError(f"matrix is singular to working precision (rcond={rc:.3e})")
    return linalg.solve(a, np.asarray(b, dtype=float))


def inverse(a) -> np.ndarray:
    a = _square(a)
    return solve_linear(a, np.eye(a.shape[0]))
