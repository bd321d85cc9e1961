"""
Complex linear-algebra kernels shared by the solvers.

All routines operate on double-precision complex numpy arrays and never
mutate their inputs.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import SingularMatrix

__all__ = ["kron", "vec", "unvec", "hermitian_solve", "frobenius_norm"]

_PIVOT_RTOL = 1e-14


def kron(a, b):
    """Kronecker product ``a ⊗ b``.

    Block ``(i, j)`` of the result is ``a[i, j] * b``. Vectors are treated
    as single-column matrices only if the caller reshapes them; 1-D inputs
    follow :func:`numpy.kron` semantics.
    """
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def vec(m):
    """Column-stacking vectorization.

    ``vec([[1, 2], [3, 4]]) == [1, 3, 2, 4]``. Column-major order is what
    makes ``x.T @ Q @ y == kron(y.T, x.T) @ vec(Q)`` hold.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"vec expects a matrix, got shape {m.shape}")
    return m.reshape(-1, order="F").astype(complex, copy=True)


def unvec(v, rows, cols):
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    return v.reshape((rows, cols), order="F").copy()


def hermitian_solve(a, rhs):
    """Solve ``a @ x = rhs`` for Hermitian positive-definite ``a``.

    Uses a Cholesky factorization. ``rhs`` may be a vector or a matrix of
    right-hand sides.

    Raises
    ------
    SingularMatrix
        If ``a`` is not positive definite, or if a Cholesky pivot
        ``L[k, k]**2`` falls below ``1e-14 * max|a|``.
    """
    a = np.asarray(a, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"hermitian_solve expects a square matrix, got {a.shape}")
    if rhs.shape[0] != a.shape[0]:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, matrix has {a.shape[0]}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    # symmetrize away round-off so the factorization sees an exactly Hermitian input
    a = 0.5 * (a + a.conj().T)
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"matrix is not positive definite: {exc}") from None
    pivots = np.abs(np.diag(low)) ** 2
    if np.min(pivots) < _PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {np.min(pivots):.3e} below {_PIVOT_RTOL:g} * max|a| = {_PIVOT_RTOL * scale:.3e}"
        )
    y = solve_triangular(low, rhs, lower=True)
    return solve_triangular(low.conj().T, y, lower=False)


def frobenius_norm(m):
    """Square root of the sum of squared magnitudes."""
    m = np.asarray(m)
    return float(np.sqrt(np.sum(m.real**2 + m.imag**2)))
