"""
Experiment drivers: precoder design per architecture, rate curves along a
probe line, normalized power maps and sum-rate sweeps over user counts.

Every driver designs its precoders once for the scenario's focal users and
then evaluates them on spherical-wavefront channels. With
``far_field=True`` the design uses plane-wave channel vectors instead
(the beam-steering baseline) while evaluation is unchanged.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..channel import build_channel, steering_vector
from ..dma import solve_dma
from ..hybrid import solve_hybrid
from ..wmmse import rate_per_user, solve_fully_digital

logger = logging.getLogger(__name__)

__all__ = [
    "Design", "RateCurve", "PowerMap", "SumRateTable", "design_precoder", "run_rate_curve",
    "run_power_map", "run_sum_rate_sweep", "place_users", "probe_line", "power_map_grid",
]

_TAN_60 = np.tan(np.deg2rad(60.0))


@dataclass
class Design:
    """Precoder of one architecture together with the array it drives.

    ``effective`` is the ``N x M`` matrix of radiated precoders.
    """

    architecture: str
    geometry: object
    effective: np.ndarray
    solution: object
    far_field: bool = False


@dataclass
class RateCurve:
    """Per-user rates with the evaluation receiver moved along a probe line.

    ``rates[arch]`` has shape ``(M, P)``: entry ``[m, p]`` is user ``m``'s
    rate when user ``m`` sits at probe ``p`` and the precoders stay fixed.
    """

    axis: np.ndarray
    positions: np.ndarray
    rates: dict = field(default_factory=dict)
    far_field: bool = False


@dataclass
class PowerMap:
    """``|a(p)^H w_m|^2 / |a(p)|^2`` over an ``x``-``z`` grid at ``y = 0``.

    ``values`` has shape ``(len(z), len(x))``.
    """

    architecture: str
    user: int
    x: np.ndarray
    z: np.ndarray
    values: np.ndarray
    far_field: bool = False

    def peak_cell(self):
        iz, ix = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(iz), int(ix)

    def cell_of(self, position):
        """Grid cell ``(iz, ix)`` nearest to ``position``."""
        ix = int(np.argmin(np.abs(self.x - position[0])))
        iz = int(np.argmin(np.abs(self.z - position[2])))
        return iz, ix


@dataclass
class SumRateTable:
    """Rows of ``(n_users, architecture, sum_rate, min_user_rate)``."""

    rows: list = field(default_factory=list)
    users: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    far_field: bool = False


def design_precoder(scenario, arch, far_field=False, users=None, seed=None):
    """Run the solver of ``arch`` for the scenario's users.

    Parameters
    ----------
    scenario : Scenario
    arch : {"fd", "hybrid", "dma"}
    far_field : bool
        Design on plane-wave channel vectors.
    users : array_like, optional
        Overrides the scenario's focal users.
    seed : int, optional
        Seed of the hybrid analog start (default: the scenario seed).
    """
    cfg = scenario.architectures[arch]
    geometry = scenario.geometry(arch)
    users = scenario.users if users is None else np.atleast_2d(users)
    channel = build_channel(users, geometry, scenario.wavelength, scenario.boresight_b,
                            scenario.noise_power, far_field=far_field)
    opts = cfg.options
    if arch == "fd":
        sol = solve_fully_digital(channel, scenario.p_max, max_iters=opts["max_iters"], tol=opts["tol"])
        effective = sol.w_tilde
    elif arch == "hybrid":
        sol = solve_hybrid(channel, scenario.p_max, outer_rounds=opts["outer_rounds"],
                           inner_iters=opts["inner_iters"], grad_tol=opts["grad_tol"],
                           seed=scenario.seed if seed is None else seed)
        effective = sol.effective
    elif arch == "dma":
        sol = solve_dma(channel, geometry, cfg.dma_params(geometry), scenario.p_max,
                        outer_rounds=opts["outer_rounds"], inner_iters=opts["inner_iters"])
        effective = sol.effective
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    return Design(arch, geometry, np.asarray(effective), sol, far_field)


def evaluate_rates(scenario, design, users=None):
    """Per-user rates of ``design`` on the spherical-wavefront channel."""
    users = scenario.users if users is None else np.atleast_2d(users)
    channel = build_channel(users, design.geometry, scenario.wavelength, scenario.boresight_b,
                            scenario.noise_power)
    return rate_per_user(channel, design.effective)


def probe_line(scenario):
    """Probe positions of a rate curve and their ``z`` coordinates.

    Defaults to ``points = 200`` log-spaced between the Fresnel distance and
    twice the Fraunhofer distance on the line ``x = y = 0``; the
    ``rate_curve`` section may override ``points``, ``z_min``, ``z_max``,
    ``x`` and ``y``.
    """
    opts = scenario.rate_curve
    points = int(opts.get("points", 200))
    z_min = float(opts.get("z_min", scenario.fresnel))
    z_max = float(opts.get("z_max", 2.0 * scenario.fraunhofer))
    z = np.geomspace(z_min, z_max, points) if points > 0 else np.zeros(0)
    positions = np.column_stack([
        np.full(z.size, float(opts.get("x", 0.0))), np.full(z.size, float(opts.get("y", 0.0))), z])
    return z, positions


def _probe_rates(scenario, design, positions):
    n_users = design.effective.shape[1]
    rates = np.zeros((n_users, len(positions)))
    for p, pos in enumerate(positions):
        a = steering_vector(pos, design.geometry, scenario.wavelength, scenario.boresight_b)
        power = np.abs(a.conj() @ design.effective) ** 2
        total = power.sum()
        rates[:, p] = np.log2(1.0 + power / (total - power + scenario.noise_power))
    return rates


def run_rate_curve(scenario, archs=None, far_field=False, positions=None, axis=None, designs=None):
    """Rates along a probe line under precoders fixed for the focal users."""
    archs = list(scenario.architectures) if archs is None else list(archs)
    if positions is None:
        axis, positions = probe_line(scenario)
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    axis = positions[:, 2] if axis is None else np.asarray(axis, dtype=float)
    curve = RateCurve(axis, positions, far_field=far_field)
    for arch in archs:
        design = designs[arch] if designs and arch in designs else design_precoder(scenario, arch, far_field)
        curve.rates[arch] = _probe_rates(scenario, design, positions)
    return curve


def power_map_grid(scenario):
    """Grid of the power map: ``x`` in ``[-d_F/2, d_F/2]`` and ``z`` in ``(0, d_F]``."""
    opts = scenario.power_map
    nx = int(opts.get("nx", 101))
    nz = int(opts.get("nz", 101))
    extent = float(opts.get("extent", scenario.fraunhofer))
    x = np.linspace(-0.5 * extent, 0.5 * extent, nx)
    z = extent * np.arange(1, nz + 1) / nz
    return x, z


def run_power_map(scenario, arch="fd", far_field=False, design=None):
    """Normalized received power of every user's beam over the ``x``-``z`` grid."""
    if design is None:
        design = design_precoder(scenario, arch, far_field)
    x, z = power_map_grid(scenario)
    n_users = design.effective.shape[1]
    values = np.zeros((n_users, z.size, x.size))
    for iz, zz in enumerate(z):
        for ix, xx in enumerate(x):
            a = steering_vector((xx, 0.0, zz), design.geometry, scenario.wavelength, scenario.boresight_b)
            norm2 = float(np.real(np.vdot(a, a)))
            if norm2 > 0:
                values[:, iz, ix] = np.abs(a.conj() @ design.effective) ** 2 / norm2
    return [PowerMap(design.architecture, m, x, z, values[m], far_field) for m in range(n_users)]


def place_users(scenario, count, seed=None):
    """Uniform random positions in the ``x``-``z`` plane.

    The region is ``1.2 d_N <= z <= 0.9 d_F`` with ``|x| <= z tan 60 deg``;
    its width grows linearly in ``z``, so ``z`` is drawn with density
    proportional to ``z``. The first ``k`` of ``count`` draws are the same
    for every ``count >= k``.
    """
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    z_lo, z_hi = 1.2 * scenario.fresnel, 0.9 * scenario.fraunhofer
    out = np.zeros((count, 3))
    for k in range(count):
        z = np.sqrt(rng.uniform(z_lo**2, z_hi**2))
        out[k] = (rng.uniform(-z * _TAN_60, z * _TAN_60), 0.0, z)
    return out


def run_sum_rate_sweep(scenario, user_counts=None, archs=None, far_field=False, seed=None):
    """Sum-rate of each architecture as users are added one at a time."""
    archs = list(scenario.architectures) if archs is None else list(archs)
    if user_counts is None:
        user_counts = scenario.sweep.get("user_counts", [1, 2, 4])
    user_counts = [int(m) for m in user_counts]
    users = place_users(scenario, max(user_counts, default=0), seed)
    table = SumRateTable(users=users, far_field=far_field)
    for count in user_counts:
        for arch in archs:
            design = design_precoder(scenario, arch, far_field, users=users[:count], seed=seed)
            rates = evaluate_rates(scenario, design, users[:count])
            table.rows.append((count, arch, float(np.sum(rates)), float(np.min(rates))))
            logger.debug("sweep M=%d %s: %.4f", count, arch, table.rows[-1][2])
    return table
