"""
Fully-digital sum-rate maximization by weighted-MMSE block coordinate
ascent, and the per-user rate evaluator shared by every architecture.

Channels are passed as any object with an ``a`` attribute of shape
``(N, M)`` (column ``m`` is user ``m``'s channel vector) and a
``noise_power`` attribute. Precoders are ``(N, M)`` matrices whose column
``m`` is the effective vector ``w_m`` carrying user ``m``'s symbol.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, DomainError

logger = logging.getLogger(__name__)

__all__ = [
    "DigitalPrecoder", "WmmseState", "gain_matrix", "rate_per_user", "sum_rate",
    "mse_term", "initial_state", "wmmse_step", "solve_fully_digital", "mrt_precoder",
]

_BISECTION_LIMIT = 200
_RANK_RTOL = 1e-13


@dataclass
class DigitalPrecoder:
    """Fully-digital solution: column ``m`` of ``w_tilde`` precodes user ``m``."""

    w_tilde: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def effective(self):
        return self.w_tilde

    @property
    def power(self):
        return float(np.sum(np.abs(self.w_tilde) ** 2))


@dataclass
class WmmseState:
    """Iterate of the block coordinate ascent.

    ``u`` holds the MMSE receive coefficients, ``v`` the MSE weights
    ``1 / e_m`` and ``w_tilde`` the precoder.
    """

    u: np.ndarray
    v: np.ndarray
    w_tilde: np.ndarray
    iteration: int = 0
    objective_history: list = field(default_factory=list)
    multiplier: float = 0.0


def gain_matrix(a, w):
    """``G[m, j] = a_m^H w_j``: the amplitude of stream ``j`` at user ``m``."""
    return np.asarray(a).conj().T @ np.asarray(w)


def _rates_from_gains(gains, noise_power):
    power = np.abs(gains) ** 2
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    denom = interference + noise_power
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(signal > 0, signal / denom, 0.0)
    return np.log2(1.0 + sinr)


def rate_per_user(channel, w):
    """Achievable rate of each user in bits/s/Hz, interference treated as noise.

    ``w`` is the ``(N, M)`` matrix of effective precoders; for hybrid and
    DMA arrays pass ``Q @ W`` and ``H @ Q @ W`` respectively.
    """
    a = np.asarray(channel.a)
    w = np.asarray(w)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape != a.shape:
        raise DomainError(f"precoder shape {w.shape} does not match channel {a.shape}")
    return _rates_from_gains(gain_matrix(a, w), channel.noise_power)


def sum_rate(channel, w):
    return float(np.sum(rate_per_user(channel, w)))


def mse_term(u_m, channel, m, w):
    """``|1 - u a_m^H w_m|^2 + sum_{j != m} |u a_m^H w_j|^2 + sigma^2 |u|^2``."""
    g = np.asarray(channel.a)[:, m].conj() @ np.asarray(w)
    others = np.delete(g, m)
    return float(abs(1.0 - u_m * g[m]) ** 2 + np.sum(np.abs(u_m * others) ** 2)
                 + channel.noise_power * abs(u_m) ** 2)


def mrt_precoder(a, p_max, split="equal"):
    """Matched-filter precoders using the full budget ``p_max``.

    ``split="equal"`` gives every user ``p_max / M``; ``split="gain"``
    makes user ``m``'s share proportional to ``|a_m|^2``. Users with an
    all-zero channel get a zero column.
    """
    a = np.asarray(a, dtype=complex)
    norms = np.linalg.norm(a, axis=0)
    w = np.zeros_like(a)
    live = norms > 0
    if not np.any(live):
        return w
    if split == "equal":
        share = np.full(a.shape[1], 1.0 / a.shape[1])
    elif split == "gain":
        share = norms**2 / np.sum(norms**2)
    else:
        raise ValueError(f"unknown power split {split!r}")
    w[:, live] = a[:, live] / norms[live] * np.sqrt(p_max * share[live])
    return w


def initial_state(channel, p_max, w0=None):
    """State seeded with ``w0`` (default: equal-power MRT)."""
    a = np.asarray(channel.a)
    w = mrt_precoder(a, p_max) if w0 is None else np.array(w0, dtype=complex)
    m = a.shape[1]
    history = [sum_rate(channel, w)]
    return WmmseState(np.zeros(m, dtype=complex), np.ones(m), w, 0, history)


def _receivers(gains, noise_power):
    """MMSE receive coefficients and the resulting MSE weights."""
    total = np.sum(np.abs(gains) ** 2, axis=1) + noise_power
    direct = np.diag(gains)
    u = np.where(total > 0, direct.conj() / np.where(total > 0, total, 1.0), 0.0)
    # e_m evaluated at the MMSE receiver; equals mse_term(u_m, ...)
    power = np.abs(gains) ** 2
    e = (np.abs(1.0 - u * direct) ** 2
         + np.abs(u) ** 2 * (power.sum(axis=1) - np.diag(power))
         + noise_power * np.abs(u) ** 2)
    return u, e


class _SubspaceSolver:
    """Solves ``(sum_j d_j a_j a_j^H + lam I) W = A diag(c)`` in the span of the channels.

    Every right-hand side lies in ``range(A)``, so the ``N x N`` system
    reduces to an ``r x r`` eigenproblem with ``r = rank(A) <= M``. The
    transmit power is then an explicit decreasing function of ``lam``.
    """

    def __init__(self, a, d, c):
        u_full, s, vh = np.linalg.svd(a, full_matrices=False)
        keep = s > _RANK_RTOL * (s[0] if s.size else 0.0)
        self.basis = u_full[:, keep]
        sv = s[keep, None] * vh[keep]                       # (r, M)
        t = (sv * d[None, :]) @ sv.conj().T
        t = 0.5 * (t + t.conj().T)
        lam, vecs = np.linalg.eigh(t)
        self.eigvals = np.clip(lam, 0.0, None)
        self.vecs = vecs
        self.coef = vecs.conj().T @ (sv * c[None, :])       # (r, M)
        self.row_energy = np.sum(np.abs(self.coef) ** 2, axis=1)
        top = self.eigvals.max() if self.eigvals.size else 0.0
        self.null = self.eigvals <= _RANK_RTOL * top

    def unbounded_at_zero(self):
        scale = self.row_energy.sum()
        return bool(np.any(self.null & (self.row_energy > 1e-20 * scale)))

    def power(self, lam):
        if lam == 0.0:
            live = ~self.null
            return float(np.sum(self.row_energy[live] / self.eigvals[live] ** 2))
        return float(np.sum(self.row_energy / (self.eigvals + lam) ** 2))

    def precoder(self, lam):
        if lam == 0.0:
            inv = np.where(self.null, 0.0, 1.0 / np.where(self.null, 1.0, self.eigvals))
        else:
            inv = 1.0 / (self.eigvals + lam)
        return self.basis @ (self.vecs @ (inv[:, None] * self.coef))


def _power_multiplier(solver, p_max):
    """Smallest ``lam >= 0`` whose precoder meets the power budget."""
    if solver.row_energy.sum() == 0.0:
        return 0.0
    if not solver.unbounded_at_zero() and solver.power(0.0) <= p_max:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(_BISECTION_LIMIT):
        if solver.power(hi) <= p_max:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceFailure("could not bracket the power multiplier")
    if lo == 0.0:
        # shrink geometrically so the bisection below starts from a finite ratio
        for _ in range(_BISECTION_LIMIT):
            trial = 0.5 * hi
            if solver.power(trial) > p_max:
                lo = trial
                break
            hi = trial
    for _ in range(_BISECTION_LIMIT):
        if hi - lo <= 1e-15 * hi or solver.power(hi) >= p_max * (1.0 - 1e-13):
            break
        mid = 0.5 * (lo + hi)
        if solver.power(mid) > p_max:
            lo = mid
        else:
            hi = mid
    return hi


def wmmse_step(state, channel, p_max):
    """One round of receiver, weight and precoder updates.

    Returns a new state; ``state`` is not modified. The precoder update is
    the exact minimizer of the weighted MSE subject to the power budget,
    with the multiplier found by bisection (zero when the unconstrained
    minimizer is already feasible).
    """
    if channel.noise_power <= 0:
        raise DomainError("weighted-MMSE updates need a positive noise power")
    a = np.asarray(channel.a)
    gains = gain_matrix(a, state.w_tilde)
    u, e = _receivers(gains, channel.noise_power)
    v = 1.0 / e
    solver = _SubspaceSolver(a, v * np.abs(u) ** 2, u.conj() * v)
    lam = _power_multiplier(solver, p_max)
    w = solver.precoder(lam)
    history = state.objective_history + [sum_rate(channel, w)]
    return WmmseState(u, v, w, state.iteration + 1, history, lam)


def _iterate(channel, p_max, w0, max_iters, tol):
    state = initial_state(channel, p_max, w0)
    for _ in range(max_iters):
        state = wmmse_step(state, channel, p_max)
        prev, cur = state.objective_history[-2:]
        if abs(cur - prev) <= tol * max(abs(prev), 1e-300):
            break
    return state


def solve_fully_digital(channel, p_max, max_iters=500, tol=1e-8, w0=None):
    """Iterate :func:`wmmse_step` until the sum-rate settles.

    Each run stops when the relative change of the sum-rate drops below
    ``tol`` or after ``max_iters`` rounds. Without ``w0`` two deterministic
    starts are tried, equal-power MRT and gain-weighted MRT, and the better
    stationary point is kept: when the channel vectors are parallel (users
    at one angle under a plane-wave model) the equal split is itself a
    fixed point of the iteration.
    """
    if p_max <= 0:
        raise DomainError(f"p_max must be positive, got {p_max}")
    a = np.asarray(channel.a)
    if a.shape[1] < 1:
        raise DomainError("at least one user is required")
    if w0 is not None:
        starts = [np.asarray(w0, dtype=complex)]
    else:
        starts = [mrt_precoder(a, p_max, "equal")]
        if a.shape[1] > 1:
            starts.append(mrt_precoder(a, p_max, "gain"))
    best = None
    for start in starts:
        state = _iterate(channel, p_max, start, max_iters, tol)
        if best is None or state.objective_history[-1] > best.objective_history[-1]:
            best = state
    logger.debug("wmmse stopped after %d iterations at %.6f bit/s/Hz",
                 best.iteration, best.objective_history[-1])
    return DigitalPrecoder(best.w_tilde, best.iteration, list(best.objective_history))
