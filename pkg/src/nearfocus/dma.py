"""
Precoding for dynamic metasurface antennas.

Each microstrip (array row ``i``) is driven by one RF chain. Its elements
apply Lorentzian weights ``q_il = (j + exp(j phi_il)) / 2`` after the
in-strip propagation factor ``h_il = exp(-rho_il (alpha + j beta))``, so
the effective precoder of user ``m`` is ``H Q w_m`` with ``Q`` the
``N x N_d`` block-structured weight matrix and ``w_m`` the digital
vector of length ``N_d``.

Weights are always stored through their phase ``phi``; complex values are
derived from it, which keeps every weight on the Lorentzian circle.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ArchitectureKind, NearFieldChannel, planar_steering_vector, steering_vector, waveguide_gains
from .errors import DomainError
from .wmmse import initial_state, mrt_precoder, sum_rate, wmmse_step

logger = logging.getLogger(__name__)

__all__ = [
    "DmaPrecoder", "lorentzian_weight", "lorentzian_project", "focusing_phases",
    "single_user_weights", "effective_channel", "dma_digital_step", "build_z_vectors",
    "element_1d_update", "solve_dma", "weight_matrix",
]

_TWO_PI = 2.0 * np.pi
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def lorentzian_weight(phi):
    """``(j + exp(j phi)) / 2``; elementwise for arrays."""
    return 0.5 * (1j + np.exp(1j * np.asarray(phi, dtype=float)))


def lorentzian_project(phase_only):
    """Map unit-modulus weights ``exp(j psi)`` to ``(j + exp(j psi)) / 2``."""
    z = np.asarray(phase_only, dtype=complex)
    if np.any(np.abs(np.abs(z) - 1.0) > 1e-9):
        raise DomainError("phase-only weights must have unit modulus")
    return 0.5 * (1j + z)


def weight_matrix(values, n_rows, n_cols):
    """Block-structured ``N x N_d`` matrix holding strip ``i``'s weights in column ``i``.

    ``values`` is row-major of length ``n_rows * n_cols``; every other entry
    is an exact zero.
    """
    values = np.asarray(values, dtype=complex).reshape(n_rows, n_cols)
    q = np.zeros((n_rows * n_cols, n_rows), dtype=complex)
    for i in range(n_rows):
        q[i * n_cols:(i + 1) * n_cols, i] = values[i]
    return q


@dataclass
class DmaPrecoder:
    """DMA configuration.

    Attributes
    ----------
    phi : ndarray, shape (N_d, N_e)
        Element phases. With ``phase_only`` the weights are ``exp(j phi)``,
        otherwise ``(j + exp(j phi)) / 2``.
    w : ndarray, shape (N_d, M)
        Digital precoder, one column per user.
    h : ndarray, shape (N,)
        Diagonal of the waveguide matrix, row-major.
    phase_only : bool
    trace : list of float
        Sum-rate after initialization and after every outer round.
    """

    phi: np.ndarray
    w: np.ndarray
    h: np.ndarray
    phase_only: bool = False
    trace: list = field(default_factory=list)

    @property
    def q_bar(self):
        """Non-zero weights, row-major (the pruned ``vec(Q)``)."""
        flat = np.asarray(self.phi, dtype=float).ravel()
        return np.exp(1j * flat) if self.phase_only else lorentzian_weight(flat)

    @property
    def q(self):
        n_rows, n_cols = np.shape(self.phi)
        return weight_matrix(self.q_bar, n_rows, n_cols)

    @property
    def h_matrix(self):
        return np.diag(self.h)

    @property
    def effective(self):
        """Effective ``N x M`` precoder ``H Q W``."""
        return self.h[:, None] * (self.q @ self.w)

    @property
    def power(self):
        """Digital-side power ``sum_m |w_m|^2``."""
        return float(np.sum(np.abs(self.w) ** 2))

    @property
    def transmit_power(self):
        """Radiated power ``|H Q W|_F^2``."""
        return float(np.sum(np.abs(self.effective) ** 2))


def focusing_phases(a, h):
    """Per-element phases ``psi`` aligning ``conj(a_n) h_n exp(j psi_n)`` to the real axis.

    For a spherical-wavefront vector this equals ``k |p - p_il| + beta rho_il``
    modulo ``2 pi``; any other design vector (a plane-wave one) is handled
    the same way.
    """
    a = np.asarray(a, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return np.mod(np.angle(a) - np.angle(h), _TWO_PI)


def _waveguide(geometry, params):
    if geometry.kind is not ArchitectureKind.DMA:
        raise DomainError(f"DMA precoding needs a DMA geometry, got {geometry.kind.value}")
    return waveguide_gains(geometry, params)


def _digital_mrt(g, p_max):
    norm = np.linalg.norm(g)
    if norm == 0:
        return np.zeros_like(g)
    return np.sqrt(p_max) * g / norm


def single_user_weights(channel, geometry, params, p_max, phase_only=False, mrt_reference="projected"):
    """Closed-form single-user configuration.

    Element phases align every strip's contributions at the receiver; the
    unit-modulus weights are then mapped onto the Lorentzian circle with
    :func:`lorentzian_project` unless ``phase_only`` is set. The digital
    vector is matched to ``a^H H Q`` using the projected weights
    (``mrt_reference="projected"``) or the unit-modulus ones
    (``"relaxed"``), at full power ``p_max``.
    """
    a = np.asarray(channel.a)
    if a.shape[1] != 1:
        raise DomainError(f"single-user design needs M = 1, got {a.shape[1]}")
    if mrt_reference not in ("projected", "relaxed"):
        raise ValueError(f"unknown MRT reference {mrt_reference!r}")
    h = _waveguide(geometry, params)
    psi = focusing_phases(a[:, 0], h)
    relaxed = np.exp(1j * psi)
    applied = relaxed if phase_only else lorentzian_project(relaxed)
    reference = relaxed if mrt_reference == "relaxed" else applied
    q = weight_matrix(reference, geometry.n_rows, geometry.n_cols)
    g = q.conj().T @ (h.conj() * a[:, 0])
    w = _digital_mrt(g, p_max)[:, None]
    phi = psi.reshape(geometry.n_rows, geometry.n_cols)
    result = DmaPrecoder(phi, w, h, phase_only)
    result.trace = [sum_rate(channel, result.effective)] if channel.noise_power > 0 else []
    return result


def effective_channel(channel, q, h):
    """``G[:, m] = Q^H H^H a_m``: the channels seen by the digital precoder."""
    a = np.asarray(channel.a if hasattr(channel, "a") else channel)
    return np.asarray(q).conj().T @ (np.asarray(h).conj()[:, None] * a)


def _reduced(channel, g):
    return NearFieldChannel(g, channel.noise_power, channel.wavelength)


def dma_digital_step(channel, q, h, w, p_max):
    """One weighted-MMSE round on the digital vectors with ``Q`` and ``H`` fixed.

    The power budget ``p_max`` applies to ``sum_m |w_m|^2``.
    """
    reduced = _reduced(channel, effective_channel(channel, q, h))
    return wmmse_step(initial_state(reduced, p_max, w), reduced, p_max).w_tilde


def build_z_vectors(channel, h, w):
    """Pruned Kronecker vectors ``z[j, m]`` of length ``N_d * N_e``.

    ``z[j, m]`` is ``(w_j^T kron a_m^H H)^H`` with the entries belonging to
    structural zeros of ``vec(Q)`` removed. Entry ``(i, l)`` (row-major)
    equals ``conj(w_j[i]) a_m[(i, l)] conj(h_(i, l))``, and
    ``z[j, m]^H q_bar = a_m^H H Q w_j``.
    """
    a = np.asarray(channel.a if hasattr(channel, "a") else channel, dtype=complex)
    w = np.asarray(w, dtype=complex)
    h = np.asarray(h, dtype=complex)
    n, n_users = a.shape
    n_rows = w.shape[0]
    if n % n_rows:
        raise DomainError(f"{n} elements do not split into {n_rows} microstrips")
    n_cols = n // n_rows
    row_of = np.repeat(np.arange(n_rows), n_cols)
    ah = a * h.conj()[:, None]                              # (N, M): conj of a_m^H H
    # z[j, m, n] = conj(w[row(n), j]) * ah[n, m]
    return w.conj()[row_of].T[:, None, :] * ah.T[None, :, :]


def _gains_from_z(z, q_bar):
    """``G[m, j] = z[j, m]^H q_bar``."""
    return np.einsum("jmn,n->mj", z.conj(), q_bar)


def _sum_rates(gains, noise_power):
    """Sum-rate for a stack of gain matrices with shape ``(..., M, M)``."""
    power = np.abs(gains) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    interference = power.sum(axis=-1) - signal
    return np.sum(np.log2(1.0 + signal / (interference + noise_power)), axis=-1)


def _phase_of(q_value):
    return float(np.mod(np.angle(2.0 * q_value - 1j), _TWO_PI))


def _line_search(base, coef, noise_power, incumbent, grid_points, tol):
    """Best phase for one element given ``G(phi) = base + coef * q(phi)``."""
    def objective(phi):
        return _sum_rates(base + coef * lorentzian_weight(phi)[..., None, None], noise_power)

    grid = np.arange(grid_points) * (_TWO_PI / grid_points)
    values = objective(grid)
    k = int(np.argmax(values))
    best_phi, best_val = float(grid[k]), float(values[k])
    inc_val = float(objective(np.array(incumbent)))
    center = best_phi if best_val > inc_val else incumbent
    step = _TWO_PI / grid_points
    lo, hi = center - step, center + step
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = float(objective(np.array(x1))), float(objective(np.array(x2)))
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = float(objective(np.array(x1)))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = float(objective(np.array(x2)))
    refined, refined_val = (x1, f1) if f1 >= f2 else (x2, f2)
    candidates = [(refined_val, refined), (best_val, best_phi), (inc_val, incumbent)]
    value, phi = max(candidates, key=lambda c: c[0])
    return float(np.mod(phi, _TWO_PI)), value


def element_1d_update(q_bar, index, z, noise_power, grid_points=360, tol=1e-6):
    """Sum-rate maximizing phase of element ``index`` with all others fixed.

    A uniform grid of ``grid_points`` phases plus the incumbent is scanned,
    then the best point is polished by golden-section search over one grid
    step on either side until the bracket is below ``tol`` radians. The
    returned phase never scores below the incumbent.
    """
    if noise_power <= 0:
        raise DomainError("sum-rate evaluation needs a positive noise power")
    q_bar = np.asarray(q_bar, dtype=complex)
    z = np.asarray(z, dtype=complex)
    gains = _gains_from_z(z, q_bar)
    coef = z[:, :, index].conj().T                           # coef[m, j]
    base = gains - coef * q_bar[index]
    phi, _ = _line_search(base, coef, noise_power, _phase_of(q_bar[index]), grid_points, tol)
    return phi


def _centroid_phases(channel, geometry, h):
    users = getattr(channel, "users", None)
    if users is None:
        design = np.asarray(channel.a).sum(axis=1)
    else:
        centroid = np.mean(np.atleast_2d(users), axis=0)
        make = planar_steering_vector if channel.far_field else steering_vector
        design = make(centroid, geometry, channel.wavelength, channel.b)
    return focusing_phases(design, h)


def _digital_block(channel, q, h, w, p_max, inner_iters, tol, alternatives=()):
    reduced = _reduced(channel, effective_channel(channel, q, h))
    best_w, best_rate = None, -np.inf
    for start in (w, *alternatives):
        state = initial_state(reduced, p_max, start)
        for _ in range(inner_iters):
            state = wmmse_step(state, reduced, p_max)
            prev, cur = state.objective_history[-2:]
            if abs(cur - prev) <= tol * max(abs(prev), 1e-300):
                break
        rate = state.objective_history[-1]
        if rate > best_rate:
            best_w, best_rate = state.w_tilde, rate
    return best_w


def solve_dma(channel, geometry, params, p_max, outer_rounds=10, inner_iters=50, inner_tol=1e-8,
              grid_points=360, phase_tol=1e-6, outer_tol=1e-6, phi0=None, scale_transmit=False):
    """Alternating digital/element optimization of a multi-user DMA precoder.

    Every outer round runs up to ``inner_iters`` weighted-MMSE rounds on the
    digital vectors and then one row-major sweep of :func:`element_1d_update`
    over all elements. The start uses the single-user focusing phases for
    the centroid of the users (projected onto the Lorentzian circle) and
    matched-filter digital vectors. Iteration stops after ``outer_rounds``
    or when a round improves the sum-rate by less than ``outer_tol``
    relative. With ``M = 1`` the closed-form :func:`single_user_weights`
    is returned instead.

    ``trace`` records the sum-rate under the digital-side budget. With
    ``scale_transmit`` the digital vectors of the result are rescaled
    afterwards so that ``|H Q W|_F^2 = p_max``.
    """
    if p_max <= 0:
        raise DomainError(f"p_max must be positive, got {p_max}")
    a = np.asarray(channel.a)
    if a.shape[1] == 1:
        result = single_user_weights(channel, geometry, params, p_max)
    else:
        if channel.noise_power <= 0:
            raise DomainError("multi-user design needs a positive noise power")
        h = _waveguide(geometry, params)
        n_rows, n_cols = geometry.n_rows, geometry.n_cols
        if phi0 is None:
            phi = _centroid_phases(channel, geometry, h)
        else:
            phi = np.mod(np.asarray(phi0, dtype=float).ravel(), _TWO_PI)
        q_bar = lorentzian_weight(phi)
        q = weight_matrix(q_bar, n_rows, n_cols)
        g = effective_channel(channel, q, h)
        w = mrt_precoder(g, p_max, "equal")
        trace = [sum_rate(_reduced(channel, g), w)]
        for round_ in range(outer_rounds):
            alternatives = (mrt_precoder(g, p_max, "gain"),) if round_ == 0 else ()
            w = _digital_block(channel, q, h, w, p_max, inner_iters, inner_tol, alternatives)
            z = build_z_vectors(a, h, w)
            gains = _gains_from_z(z, q_bar)
            for n in range(q_bar.size):
                coef = z[:, :, n].conj().T
                base = gains - coef * q_bar[n]
                phi[n], _ = _line_search(base, coef, channel.noise_power, phi[n], grid_points, phase_tol)
                q_bar[n] = lorentzian_weight(phi[n])
                gains = base + coef * q_bar[n]
            q = weight_matrix(q_bar, n_rows, n_cols)
            g = effective_channel(channel, q, h)
            trace.append(sum_rate(_reduced(channel, g), w))
            logger.debug("dma round %d: %.6f bit/s/Hz", round_, trace[-1])
            if trace[-1] - trace[-2] <= outer_tol * max(abs(trace[-2]), 1e-300):
                break
        result = DmaPrecoder(phi.reshape(n_rows, n_cols), w, h, False, trace)
    if scale_transmit:
        radiated = result.transmit_power
        if radiated > 0:
            result.w = result.w * np.sqrt(p_max / radiated)
    return result
