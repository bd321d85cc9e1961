"""
Array geometries, near/far-field region boundaries and free-space channel
synthesis for planar transmit arrays.

Element ``(i, l)`` (row ``i`` of ``n_rows``, column ``l`` of ``n_cols``)
is stored at flat index ``i * n_cols + l`` everywhere in the package. For
a DMA, rows are microstrips and columns are the elements along a strip.

The channel vector of a receiver at ``p`` has entries
``A_il(p) * exp(+1j * k * |p - p_il|)``, so that the received sample is
``a.conj() @ s`` and each element contributes a phase ``-k |p - p_il|``.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, DomainError

SPEED_OF_LIGHT = 299_792_458.0
"Speed of light in m/s (exact)."

_MIN_DISTANCE = 1e-9


def wavelength_from_frequency(frequency):
    """Free-space wavelength in meters for a carrier in Hz."""
    if frequency <= 0:
        raise DomainError(f"carrier frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


class ArchitectureKind(str, enum.Enum):
    FULLY_DIGITAL = "fd"
    HYBRID = "hybrid"
    DMA = "dma"


class Region(str, enum.Enum):
    REACTIVE = "reactive"
    NEAR_FIELD = "near-field"
    FAR_FIELD = "far-field"


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array in the ``z = 0`` plane, centred on the origin.

    Rows run along ``y`` (spacing ``row_spacing``), columns along ``x``
    (spacing ``col_spacing``).
    """

    n_rows: int
    n_cols: int
    row_spacing: float
    col_spacing: float
    kind: ArchitectureKind = ArchitectureKind.FULLY_DIGITAL
    n_rf: int | None = None

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DomainError(f"array needs at least one element, got {self.n_rows}x{self.n_cols}")
        if self.row_spacing <= 0 or self.col_spacing <= 0:
            raise DomainError("element spacings must be positive")
        object.__setattr__(self, "kind", ArchitectureKind(self.kind))
        if self.kind is ArchitectureKind.HYBRID:
            n_rf = self.n_rows if self.n_rf is None else int(self.n_rf)
            if not 1 <= n_rf <= self.n_elements:
                raise DomainError(f"n_rf must lie in [1, {self.n_elements}], got {n_rf}")
            object.__setattr__(self, "n_rf", n_rf)
        elif self.n_rf is not None:
            raise DomainError("n_rf only applies to hybrid arrays")

    @classmethod
    def for_aperture(cls, length, row_spacing, col_spacing, kind=ArchitectureKind.FULLY_DIGITAL,
                     n_rf=None):
        """Square aperture of side ``length`` filled at the given spacings.

        Element counts are ``floor(length / spacing)``; with half-wavelength
        spacing this is ``floor(2 L / wavelength)``.
        """
        if length <= 0:
            raise DomainError(f"aperture length must be positive, got {length}")
        # the tolerance keeps exact ratios such as L / (L/4) from flooring to 3
        n_rows = int(np.floor(length / row_spacing + 1e-9))
        n_cols = int(np.floor(length / col_spacing + 1e-9))
        return cls(max(n_rows, 1), max(n_cols, 1), row_spacing, col_spacing, kind, n_rf)

    @property
    def n_elements(self):
        return self.n_rows * self.n_cols

    @property
    def x(self):
        """Column coordinates ``x_l``."""
        return (np.arange(self.n_cols) - (self.n_cols - 1) / 2.0) * self.col_spacing

    @property
    def y(self):
        """Row coordinates ``y_i``."""
        return (np.arange(self.n_rows) - (self.n_rows - 1) / 2.0) * self.row_spacing

    @property
    def positions(self):
        """``(N, 3)`` element coordinates, row-major over ``(i, l)``."""
        yy, xx = np.meshgrid(self.y, self.x, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), np.zeros(self.n_elements)])

    @property
    def diameter(self):
        """Diagonal of the bounding rectangle of the element positions."""
        return float(np.hypot((self.n_cols - 1) * self.col_spacing,
                              (self.n_rows - 1) * self.row_spacing))


@dataclass(frozen=True)
class DmaParams:
    """Microstrip propagation constants and in-strip element coordinates.

    ``rho`` has shape ``(n_rows, n_cols)``; ``rho[i, l]`` is the distance
    from the feed of strip ``i`` to its ``l``-th element.
    """

    alpha: float
    beta: float
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        if self.alpha < 0:
            raise DomainError(f"attenuation alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise DomainError(f"wavenumber beta must be > 0, got {self.beta}")
        if np.any(rho < 0):
            raise DomainError("in-strip coordinates rho must be nonnegative")
        if rho.shape[1] > 1 and np.any(np.diff(rho, axis=1) <= 0):
            raise DomainError("rho must be strictly increasing along each microstrip")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_geometry(cls, geometry, alpha=0.6, beta=827.67):
        """Feed at the first column of every strip; ``rho`` is the x-offset from it."""
        offsets = geometry.x - geometry.x[0]
        return cls(alpha, beta, np.tile(offsets, (geometry.n_rows, 1)))


def fraunhofer_distance(diameter, wavelength):
    """``2 D^2 / wavelength``: beyond it the wavefront is effectively planar."""
    if diameter <= 0 or wavelength <= 0:
        raise DomainError(f"diameter and wavelength must be positive, got {diameter}, {wavelength}")
    return 2.0 * diameter**2 / wavelength


def fresnel_distance(diameter, wavelength):
    """``(D^4 / (8 wavelength))^(1/3)``: inner edge of the radiative near field."""
    if diameter <= 0 or wavelength <= 0:
        raise DomainError(f"diameter and wavelength must be positive, got {diameter}, {wavelength}")
    return float(np.cbrt(diameter**4 / (8.0 * wavelength)))


def region_of(user, geometry, wavelength):
    """Classify the distance of ``user`` from the array centre.

    Ties go to the inner region: exactly ``d_N`` is reactive, exactly
    ``d_F`` is near-field.
    """
    distance = float(np.linalg.norm(np.asarray(user, dtype=float)))
    d_n = fresnel_distance(geometry.diameter, wavelength)
    d_f = fraunhofer_distance(geometry.diameter, wavelength)
    if distance <= d_n:
        return Region.REACTIVE
    if distance <= d_f:
        return Region.NEAR_FIELD
    return Region.FAR_FIELD


def radiation_profile(theta, b=2.0):
    """Element power pattern ``2 (b + 1) cos^b(theta)`` on ``[0, pi/2]``, zero elsewhere."""
    if b < 0:
        raise DomainError(f"boresight exponent must be >= 0, got {b}")
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= 0.0) & (theta <= np.pi / 2)
    cos = np.where(theta == np.pi / 2, 0.0, np.cos(theta))
    # clip keeps fractional powers real
    gain = 2.0 * (b + 1.0) * np.clip(cos, 0.0, None) ** b
    out = np.where(inside, gain, 0.0)
    return out if out.ndim else float(out)


def _profile_from_cosine(cos_theta, b):
    # same as radiation_profile(arccos(c)) without the round trip through arccos
    inside = cos_theta >= 0.0
    return np.where(inside, 2.0 * (b + 1.0) * np.clip(cos_theta, 0.0, None) ** b, 0.0)


def steering_vector(user, geometry, wavelength, b=2.0):
    """Spherical-wavefront channel vector of a receiver at ``user``.

    Entry ``(i, l)`` is ``sqrt(F(theta_il)) * wavelength / (4 pi d_il) *
    exp(+1j k d_il)`` with ``d_il = |p - p_il|`` and ``theta_il`` measured
    from broadside at element ``(i, l)``. Receivers behind the array
    (``z < 0``) see an all-zero vector.
    """
    p = np.asarray(user, dtype=float)
    diff = p[None, :] - geometry.positions
    dist = np.linalg.norm(diff, axis=1)
    if np.min(dist) < _MIN_DISTANCE:
        raise DegenerateGeometry(f"receiver at {p.tolist()} coincides with an array element")
    k = 2.0 * np.pi / wavelength
    gain = np.sqrt(_profile_from_cosine(diff[:, 2] / dist, b)) * wavelength / (4.0 * np.pi * dist)
    return gain * np.exp(1j * k * dist)


def planar_steering_vector(user, geometry, wavelength, b=2.0):
    """Far-field (plane-wave) approximation of :func:`steering_vector`.

    All elements share the gain of the array centre; the phase is the
    first-order expansion ``k (r - u . p_il)`` with ``u`` the unit
    direction to the receiver.
    """
    p = np.asarray(user, dtype=float)
    r = float(np.linalg.norm(p))
    if r < _MIN_DISTANCE:
        raise DegenerateGeometry("receiver at the array centre has no direction")
    u = p / r
    k = 2.0 * np.pi / wavelength
    gain = np.sqrt(_profile_from_cosine(u[2], b)) * wavelength / (4.0 * np.pi * r)
    path = r - geometry.positions @ u
    return gain * np.exp(1j * k * path)


def waveguide_gains(geometry, params):
    """Diagonal of the waveguide matrix, ``exp(-rho (alpha + j beta))`` row-major."""
    rho = np.asarray(params.rho, dtype=float)
    if rho.shape != (geometry.n_rows, geometry.n_cols):
        raise DomainError(f"rho has shape {rho.shape}, geometry is {geometry.n_rows}x{geometry.n_cols}")
    return np.exp(-rho.ravel() * (params.alpha + 1j * params.beta))


def waveguide_matrix(geometry, params):
    """``N x N`` diagonal matrix of in-strip propagation factors."""
    if geometry.kind is not ArchitectureKind.DMA:
        raise DomainError("waveguide matrix is only defined for DMA geometries")
    return np.diag(waveguide_gains(geometry, params))


@dataclass(frozen=True)
class NearFieldChannel:
    """Channel vectors of ``M`` receivers as seen by the precoders.

    Attributes
    ----------
    a : ndarray, shape (N, M)
        Column ``m`` is the channel vector of user ``m``.
    noise_power : float
        Receiver noise power in watts.
    wavelength : float
        Carrier wavelength in meters.
    users : ndarray, shape (M, 3), optional
        Receiver positions the vectors were synthesized for.
    geometry : ArrayGeometry, optional
    b : float
        Boresight exponent of the element pattern.
    far_field : bool
        True when the vectors use the plane-wave approximation.
    """

    a: np.ndarray = field(repr=False)
    noise_power: float
    wavelength: float
    users: np.ndarray | None = field(default=None, repr=False)
    geometry: ArrayGeometry | None = None
    b: float = 2.0
    far_field: bool = False

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        if a.ndim == 1:
            a = a[:, None]
        if not np.all(np.isfinite(a)):
            raise DomainError("channel vectors must be finite")
        if self.noise_power < 0:
            raise DomainError(f"noise power must be >= 0, got {self.noise_power}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def wavenumber(self):
        return 2.0 * np.pi / self.wavelength

    @property
    def n_users(self):
        return self.a.shape[1]

    @property
    def n_elements(self):
        return self.a.shape[0]


def build_channel(users, geometry, wavelength, b=2.0, noise_power=0.0, far_field=False):
    """Stack per-user channel vectors into a :class:`NearFieldChannel`.

    With ``far_field=True`` the plane-wave vectors of
    :func:`planar_steering_vector` are used instead; this is the
    beam-steering baseline.
    """
    users = np.atleast_2d(np.asarray(users, dtype=float))
    if users.shape[0] < 1 or users.shape[1] != 3:
        raise DomainError(f"users must be an (M, 3) array with M >= 1, got {users.shape}")
    make = planar_steering_vector if far_field else steering_vector
    a = np.column_stack([make(p, geometry, wavelength, b) for p in users])
    return NearFieldChannel(a, noise_power, wavelength, users, geometry, b, far_field)
