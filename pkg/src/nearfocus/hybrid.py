"""
Phase-shifter hybrid precoding.

The analog matrix ``Q`` (``N x N_RF``, unit-modulus entries) and digital
matrix ``W`` (``N_RF x M``) are fitted to a fully-digital solution
``W_opt`` by alternating least squares in ``W`` and Riemannian conjugate
gradient over the product of complex circles in ``q = vec(Q)``.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRetraction, DomainError, LineSearchFailure, SingularMatrix
from .numerics import frobenius_norm, hermitian_solve, unvec, vec
from .wmmse import solve_fully_digital

logger = logging.getLogger(__name__)

__all__ = [
    "HybridPrecoder", "RcgResult", "ls_digital", "surrogate_objective", "euclidean_grad",
    "riemannian_grad", "retract", "vector_transport", "rcg_minimize", "solve_hybrid",
    "initial_analog",
]


@dataclass
class HybridPrecoder:
    q: np.ndarray
    w: np.ndarray
    surrogate_history: list = field(default_factory=list)
    residual: float = float("nan")

    @property
    def effective(self):
        return self.q @ self.w

    @property
    def power(self):
        return frobenius_norm(self.effective) ** 2


@dataclass
class RcgResult:
    """Outcome of :func:`rcg_minimize`; ``point`` is ``vec(Q)``."""

    point: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    history: list
    line_search_failed: bool = False


def ls_digital(q, w_opt):
    """Least-squares digital precoder ``(Q^H Q)^{-1} Q^H W_opt``.

    A ridge of ``1e-10 * tr(Q^H Q) / N_RF`` is added when the Gram matrix
    has condition number above ``1e12``.
    """
    q = np.asarray(q, dtype=complex)
    gram = q.conj().T @ q
    rhs = q.conj().T @ np.asarray(w_opt, dtype=complex)
    if np.linalg.cond(gram) > 1e12:
        ridge = 1e-10 * np.trace(gram).real / gram.shape[0]
        gram = gram + ridge * np.eye(gram.shape[0])
    try:
        return hermitian_solve(gram, rhs)
    except SingularMatrix as exc:
        raise SingularMatrix(f"analog Gram matrix singular after ridge: {exc}") from None


def surrogate_objective(q_s, w, w_opt):
    """``|vec(W_opt) - (W^T kron I) q|^2`` evaluated as ``|W_opt - Q W|_F^2``."""
    w_opt = np.asarray(w_opt)
    q = unvec(q_s, w_opt.shape[0], np.asarray(w).shape[0])
    return frobenius_norm(q @ w - w_opt) ** 2


def euclidean_grad(q_s, w, w_opt):
    """``2 (conj(W) kron I) ((W^T kron I) q - vec(W_opt))``.

    Computed as ``2 vec((Q W - W_opt) W^H)``, which is the same vector
    without forming the Kronecker products.
    """
    w = np.asarray(w)
    w_opt = np.asarray(w_opt)
    q = unvec(q_s, w_opt.shape[0], w.shape[0])
    return 2.0 * vec((q @ w - w_opt) @ w.conj().T)


def _tangent_projection(point, v):
    return v - np.real(v * point.conj()) * point


def riemannian_grad(q_s, egrad):
    """Project a Euclidean gradient onto the tangent space of the circle product."""
    return _tangent_projection(np.asarray(q_s), np.asarray(egrad))


def vector_transport(q_new, eta):
    """Move a tangent vector to the tangent space at ``q_new`` (projection)."""
    return _tangent_projection(np.asarray(q_new), np.asarray(eta))


def retract(q_s, direction, step):
    """Entrywise normalization of ``q + step * direction``."""
    moved = np.asarray(q_s) + step * np.asarray(direction)
    mag = np.abs(moved)
    if np.min(mag) < 1e-14:
        raise DegenerateRetraction(f"retraction hit an entry of magnitude {np.min(mag):.3e}")
    return moved / mag


def _inner(x, y):
    return float(np.real(np.vdot(x, y)))


def rcg_minimize(w, w_opt, q0, max_iters=200, grad_tol=1e-6, initial_step=None,
                 shrink=0.5, sufficient_decrease=1e-4, max_backtracks=50, callback=None):
    """Riemannian conjugate gradient for :func:`surrogate_objective` over unit-modulus ``q``.

    Search directions use the Polak-Ribiere coefficient clipped at zero;
    step sizes come from Armijo backtracking. The first trial step of
    every line search is the exact minimizer of the quadratic along the
    direction in the ambient space, unless ``initial_step`` fixes it.

    ``callback(point, value)`` is invoked for the start point and every
    accepted iterate. If backtracking runs out, a :class:`LineSearchFailure`
    warning is issued and the best point so far is returned.
    """
    w = np.asarray(w, dtype=complex)
    w_opt = np.asarray(w_opt, dtype=complex)
    n, n_rf = w_opt.shape[0], w.shape[0]
    q = np.array(q0, dtype=complex).ravel()
    if q.size != n * n_rf:
        raise DomainError(f"start point has {q.size} entries, expected {n * n_rf}")
    if np.max(np.abs(np.abs(q) - 1.0)) > 1e-9:
        raise DomainError("start point must have unit-modulus entries")
    q = q / np.abs(q)

    value = surrogate_objective(q, w, w_opt)
    grad = riemannian_grad(q, euclidean_grad(q, w, w_opt))
    eta = -grad
    history = [value]
    if callback is not None:
        callback(q, value)
    failed = False
    for it in range(max_iters):
        gnorm = np.sqrt(_inner(grad, grad))
        if gnorm <= grad_tol:
            break
        slope = _inner(grad, eta)
        if slope >= 0:
            # transported direction lost descent; restart from steepest descent
            eta = -grad
            slope = -gnorm**2
        if initial_step is None:
            d = vec(unvec(eta, n, n_rf) @ w)
            curv = _inner(d, d)
            step = -0.5 * slope / curv if curv > 0 else 1.0
        else:
            step = float(initial_step)
        for _ in range(max_backtracks + 1):
            candidate = retract(q, eta, step)
            cand_value = surrogate_objective(candidate, w, w_opt)
            if cand_value <= value + sufficient_decrease * step * slope:
                break
            step *= shrink
        else:
            failed = True
            warnings.warn(LineSearchFailure(
                f"Armijo backtracking exhausted {max_backtracks} halvings at iteration {it}"),
                stacklevel=2)
            break
        new_grad = riemannian_grad(candidate, euclidean_grad(candidate, w, w_opt))
        old_grad_moved = vector_transport(candidate, grad)
        beta = _inner(new_grad, new_grad - old_grad_moved) / max(_inner(grad, grad), 1e-300)
        eta = -new_grad + max(beta, 0.0) * vector_transport(candidate, eta)
        q, value, grad = candidate, cand_value, new_grad
        history.append(value)
        if callback is not None:
            callback(q, value)
    return RcgResult(q, value, float(np.sqrt(_inner(grad, grad))), len(history) - 1, history, failed)


def initial_analog(w_opt, n_rf, seed=0):
    """Seeded unit-modulus start for the analog matrix.

    A complex Gaussian ``N x N_RF`` draw is projected onto the column space
    of ``W_opt`` and its phases are kept for the first ``rank(W_opt)``
    columns. The remaining columns keep the phases of the raw draw: the
    projection of those columns would only repeat the first ones up to a
    phase, and a start whose columns are all parallel is a stationary
    point of the fit.
    """
    w_opt = np.asarray(w_opt, dtype=complex)
    n = w_opt.shape[0]
    rng = np.random.default_rng(seed)
    draw = rng.standard_normal((n, n_rf)) + 1j * rng.standard_normal((n, n_rf))
    basis, s, _ = np.linalg.svd(w_opt, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * s[0])) if s.size and s[0] > 0 else 0
    basis = basis[:, :rank]
    start = draw.copy()
    cols = min(rank, n_rf)
    if cols:
        projected = basis @ (basis.conj().T @ draw[:, :cols])
        # an exactly zero entry has no phase; keep the raw draw there
        start[:, :cols] = np.where(np.abs(projected) > 1e-300, projected, draw[:, :cols])
    return start / np.abs(start)


def solve_hybrid(channel, p_max, n_rf=None, outer_rounds=20, inner_iters=200, grad_tol=1e-6,
                 seed=0, q0=None, w_opt=None, wmmse_options=None):
    """Hybrid precoder approximating the fully-digital weighted-MMSE solution.

    Alternates ``outer_rounds`` times between :func:`rcg_minimize` on the
    analog matrix (warm-started from the previous round) and
    :func:`ls_digital`, then rescales ``W`` so that ``|Q W|_F^2 = p_max``.
    The fit is carried out on ``W_opt / |W_opt|_F`` so that ``grad_tol``
    is scale free.
    """
    if n_rf is None:
        geometry = getattr(channel, "geometry", None)
        if geometry is None or geometry.n_rf is None:
            raise DomainError("n_rf must be given when the channel has no hybrid geometry")
        n_rf = geometry.n_rf
    n = channel.a.shape[0]
    if not 1 <= n_rf <= n:
        raise DomainError(f"n_rf must lie in [1, {n}], got {n_rf}")
    if w_opt is None:
        w_opt = solve_fully_digital(channel, p_max, **(wmmse_options or {})).w_tilde
    w_opt = np.asarray(w_opt, dtype=complex)
    scale = frobenius_norm(w_opt)
    if scale == 0:
        raise DomainError("fully-digital solution is identically zero")
    target = w_opt / scale

    q = initial_analog(target, n_rf, seed) if q0 is None else np.array(q0, dtype=complex)
    w = ls_digital(q, target)
    history = [frobenius_norm(target - q @ w) ** 2]
    for _ in range(outer_rounds):
        result = rcg_minimize(w, target, vec(q), max_iters=inner_iters, grad_tol=grad_tol)
        q = unvec(result.point, n, n_rf)
        w = ls_digital(q, target)
        history.append(frobenius_norm(target - q @ w) ** 2)
        if history[-2] - history[-1] <= 1e-12 * max(history[0], 1e-300):
            break
    residual = frobenius_norm(target - q @ w)
    power = frobenius_norm(q @ w)
    if power == 0:
        raise DomainError("hybrid fit collapsed to zero")
    w = w * np.sqrt(p_max) / power
    logger.debug("hybrid fit: relative residual %.3e after %d rounds", residual, len(history) - 1)
    return HybridPrecoder(q, w, history, residual)
