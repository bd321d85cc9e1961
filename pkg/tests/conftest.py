import numpy as np
import pytest

from nearfocus.channel import ArrayGeometry, build_channel, fraunhofer_distance, wavelength_from_frequency
from nearfocus.harness.scenario import dbm_to_watts

CARRIER = 28e9
P_MAX = dbm_to_watts(-13.0)
NOISE = dbm_to_watts(-114.0)

# acceptance outcome lines, printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def wavelength():
    return wavelength_from_frequency(CARRIER)


def square_array(length, spacing_wl, kind="fd", n_rf=None):
    lam = wavelength_from_frequency(CARRIER)
    return ArrayGeometry.for_aperture(length, spacing_wl * lam, spacing_wl * lam, kind, n_rf)


def boresight_users(length, fractions):
    """Users on the z-axis at the given fractions of the Fraunhofer distance of a square aperture."""
    lam = wavelength_from_frequency(CARRIER)
    d_f = fraunhofer_distance(np.sqrt(2.0) * length, lam)
    return np.array([[0.0, 0.0, f * d_f] for f in fractions])


def random_channel(rng, n, m, noise=NOISE, scale=None):
    """Complex Gaussian channel with a path gain typical of the near-field scenarios."""
    lam = wavelength_from_frequency(CARRIER)
    scale = lam / (4 * np.pi * 0.5) if scale is None else scale
    from nearfocus.channel import NearFieldChannel
    a = scale * (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
    return NearFieldChannel(a, noise, lam)


def near_field_channel(rng, n_side, m, lam=None):
    """Random users in front of a small half-wavelength array, inside its near field."""
    lam = wavelength_from_frequency(CARRIER) if lam is None else lam
    geom = ArrayGeometry(n_side, n_side, lam / 2, lam / 2)
    d_f = fraunhofer_distance(max(geom.diameter, lam), lam)
    z = rng.uniform(0.05, 0.9, m) * max(d_f, 5 * lam) + lam
    x = rng.uniform(-0.5, 0.5, m) * z
    y = rng.uniform(-0.2, 0.2, m) * z
    return build_channel(np.column_stack([x, y, z]), geom, lam, 2.0, NOISE)
