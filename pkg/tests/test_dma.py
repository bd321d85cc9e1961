import numpy as np
import pytest

from conftest import NOISE, P_MAX, boresight_users, square_array
from nearfocus.channel import ArrayGeometry, DmaParams, NearFieldChannel, build_channel, waveguide_gains
from nearfocus.dma import (build_z_vectors, dma_digital_step, effective_channel, element_1d_update,
                           lorentzian_project, lorentzian_weight, single_user_weights, solve_dma, weight_matrix)
from nearfocus.errors import DomainError
from nearfocus.numerics import kron, vec
from nearfocus.wmmse import rate_per_user, sum_rate


def crandn(r, *shape):
    return r.standard_normal(shape) + 1j * r.standard_normal(shape)


def dma_setup(wavelength, length=0.05, fractions=(0.1,)):
    geom = square_array(length, 0.2, "dma")
    params = DmaParams.from_geometry(geom)
    ch = build_channel(boresight_users(length, fractions), geom, wavelength, 2, NOISE)
    return geom, params, ch


def z_objective(z, q_bar, noise):
    """Sum-rate written through the pruned vectors: G[m, j] = z[j, m]^H q_bar."""
    n_users = z.shape[1]
    g = np.array([[np.vdot(z[j, m], q_bar) for j in range(n_users)] for m in range(n_users)])
    p = np.abs(g) ** 2
    sig = np.diag(p)
    return float(np.sum(np.log2(1 + sig / (p.sum(axis=1) - sig + noise))))


def test_lorentzian_project_examples():
    assert lorentzian_project(1.0) == pytest.approx((1 + 1j) / 2)
    assert lorentzian_project(1j) == pytest.approx(1j)
    q = lorentzian_project(np.exp(1j * np.linspace(0, 2 * np.pi, 1000)))
    assert np.max(np.abs(np.abs(q - 0.5j) - 0.5)) <= 1e-12
    with pytest.raises(DomainError):
        lorentzian_project(0.5)


def test_weight_matrix_structure(rng):
    vals = lorentzian_weight(rng.uniform(0, 2 * np.pi, 6))
    q = weight_matrix(vals, 2, 3)
    assert q.shape == (6, 2)
    np.testing.assert_array_equal(q[:3, 0], vals[:3])
    np.testing.assert_array_equal(q[3:, 1], vals[3:])
    assert np.all(q[3:, 0] == 0) and np.all(q[:3, 1] == 0)


def test_focusing_phases_follow_distance_and_waveguide(wavelength):
    geom, params, ch = dma_setup(wavelength)
    sol = single_user_weights(ch, geom, params, P_MAX, phase_only=True)
    d = np.linalg.norm(ch.users[0] - geom.positions, axis=1)
    k = 2 * np.pi / wavelength
    expected = k * d + params.beta * params.rho.ravel()
    np.testing.assert_allclose(np.exp(1j * sol.phi.ravel()), np.exp(1j * expected), atol=1e-8)
    # at the feed the waveguide adds no phase
    feed = np.arange(geom.n_rows) * geom.n_cols
    np.testing.assert_allclose(np.exp(1j * sol.phi.ravel()[feed]), np.exp(1j * k * d[feed]), atol=1e-9)


def test_phase_only_strip_sums_aligned(wavelength):
    geom, params, ch = dma_setup(wavelength)
    sol = single_user_weights(ch, geom, params, P_MAX, phase_only=True)
    terms = (ch.a[:, 0].conj() * sol.h * sol.q_bar).reshape(geom.n_rows, geom.n_cols)
    sums = terms.sum(axis=1)
    assert np.all(sums.real > 0)
    assert np.max(np.abs(sums.imag) / np.abs(sums)) < 1e-9


def test_single_user_projected_weights(wavelength):
    geom, params, ch = dma_setup(wavelength)
    sol = single_user_weights(ch, geom, params, P_MAX)
    assert np.max(np.abs(np.abs(sol.q_bar - 0.5j) - 0.5)) <= 1e-12
    assert sol.power == pytest.approx(P_MAX, rel=1e-12)
    # digital part is matched to the projected configuration
    g = effective_channel(ch, sol.q, sol.h)[:, 0]
    np.testing.assert_allclose(sol.w[:, 0], np.sqrt(P_MAX) * g / np.linalg.norm(g), atol=1e-15)
    relaxed = single_user_weights(ch, geom, params, P_MAX, mrt_reference="relaxed")
    np.testing.assert_array_equal(relaxed.phi, sol.phi)
    assert sum_rate(ch, relaxed.effective) <= sum_rate(ch, sol.effective) + 1e-9


def test_phase_only_beats_random_configurations(wavelength):
    geom = ArrayGeometry(2, 3, wavelength / 5, wavelength / 5, "dma")
    params = DmaParams.from_geometry(geom)
    ch = build_channel([(0.004, 0.001, 0.05)], geom, wavelength, 2, NOISE)
    sol = single_user_weights(ch, geom, params, P_MAX, phase_only=True)
    best = sum_rate(ch, sol.effective)
    r = np.random.default_rng(1)
    h = waveguide_gains(geom, params)
    terms = (ch.a[:, 0].conj() * h).reshape(2, 3)
    q = np.exp(1j * r.uniform(0, 2 * np.pi, (100_000, 2, 3)))
    strip = np.sum(terms[None] * q, axis=2)
    rates = np.log2(1 + P_MAX * np.sum(np.abs(strip) ** 2, axis=1) / NOISE)
    assert best >= rates.max()


def test_effective_channel_examples(rng):
    a = crandn(rng, 4, 2)
    ch = NearFieldChannel(a, NOISE, 0.01)
    q = weight_matrix(np.ones(4), 1, 4)
    np.testing.assert_allclose(effective_channel(ch, q, np.ones(4)), a.sum(axis=0)[None, :], atol=1e-15)
    zero = NearFieldChannel(np.zeros((4, 1)), NOISE, 0.01)
    assert np.all(effective_channel(zero, q, np.ones(4)) == 0)
    vals = lorentzian_weight(rng.uniform(0, 2 * np.pi, 6))
    h = np.exp(-rng.uniform(0, 0.1, 6) * (0.6 + 800j))
    q = weight_matrix(vals, 2, 3)
    a = crandn(rng, 6, 3)
    ref = q.conj().T @ np.diag(h).conj().T @ a
    np.testing.assert_allclose(effective_channel(NearFieldChannel(a, NOISE, 0.01), q, h), ref, atol=1e-13)


def test_digital_step_single_user_is_mrt(rng):
    a = crandn(rng, 6, 1) * 1e-3
    ch = NearFieldChannel(a, NOISE, 0.01)
    q = weight_matrix(lorentzian_weight(rng.uniform(0, 2 * np.pi, 6)), 2, 3)
    h = np.ones(6)
    w = dma_digital_step(ch, q, h, crandn(rng, 2, 1), P_MAX)
    g = effective_channel(ch, q, h)[:, 0]
    assert abs(np.vdot(g, w[:, 0])) == pytest.approx(np.sqrt(P_MAX) * np.linalg.norm(g), rel=1e-9)


def test_digital_step_ascent_and_random_search(rng):
    a = crandn(rng, 6, 2)
    ch = NearFieldChannel(a, 0.1, 0.01)
    q = weight_matrix(lorentzian_weight(rng.uniform(0, 2 * np.pi, 6)), 2, 3)
    h = np.exp(-np.tile([0.0, 0.01, 0.02], 2) * (0.6 + 827.67j))
    w = 0.5 * crandn(rng, 2, 2)
    w *= np.sqrt(1.0 / np.sum(np.abs(w) ** 2))
    rates = [sum_rate(ch, h[:, None] * (q @ w))]
    for _ in range(300):
        w = dma_digital_step(ch, q, h, w, 1.0)
        assert np.sum(np.abs(w) ** 2) <= 1 + 1e-9
        rates.append(sum_rate(ch, h[:, None] * (q @ w)))
    assert np.all(np.diff(rates) >= -1e-9)
    g = effective_channel(ch, q, h)
    cand = crandn(rng, 200_000, 2, 2)
    cand /= np.sqrt(np.sum(np.abs(cand) ** 2, axis=(1, 2), keepdims=True))
    gains = np.einsum("nm,knj->kmj", g.conj(), cand)
    p = np.abs(gains) ** 2
    sig = np.diagonal(p, axis1=1, axis2=2)
    found = np.sum(np.log2(1 + sig / (p.sum(axis=2) - sig + 0.1)), axis=1).max()
    assert rates[-1] >= found - 1e-9


def test_z_vectors_single_strip_is_kronecker(rng):
    a = crandn(rng, 4, 2)
    h = np.exp(-1j * rng.uniform(0, 3, 4))
    w = crandn(rng, 1, 2)
    z = build_z_vectors(NearFieldChannel(a, NOISE, 0.01), h, w)
    for j in range(2):
        for m in range(2):
            full = kron(w[:, j][None, :], (a[:, m].conj() * h)[None, :]).conj().ravel()
            np.testing.assert_allclose(z[j, m], full, atol=1e-15)


def test_z_vectors_pruned_kronecker(rng):
    n_rows, n_cols = 3, 2
    n = n_rows * n_cols
    a = crandn(rng, n, 2)
    h = np.exp(-1j * rng.uniform(0, 3, n))
    w = crandn(rng, n_rows, 2)
    vals = lorentzian_weight(rng.uniform(0, 2 * np.pi, n))
    q = weight_matrix(vals, n_rows, n_cols)
    keep = vec(q) != 0
    z = build_z_vectors(NearFieldChannel(a, NOISE, 0.01), h, w)
    for j in range(2):
        for m in range(2):
            full = kron(w[:, j][None, :], (a[:, m].conj() @ np.diag(h))[None, :]).conj().ravel()
            np.testing.assert_allclose(z[j, m], full[keep], atol=1e-14)
            direct = a[:, m].conj() @ np.diag(h) @ q @ w[:, j]
            assert np.vdot(z[j, m], vals) == pytest.approx(direct, rel=1e-12)
    assert np.all(build_z_vectors(NearFieldChannel(a, NOISE, 0.01), h, np.zeros((n_rows, 2))) == 0)


def test_vectorized_objective_matches_matrix_form(rng, wavelength):
    geom = ArrayGeometry(3, 4, wavelength / 5, wavelength / 5, "dma")
    params = DmaParams.from_geometry(geom)
    ch = build_channel([(0.0, 0.0, 0.02), (0.005, 0.0, 0.04)], geom, wavelength, 2, NOISE)
    h = waveguide_gains(geom, params)
    for _ in range(10):
        vals = lorentzian_weight(rng.uniform(0, 2 * np.pi, geom.n_elements))
        w = crandn(rng, 3, 2)
        w *= np.sqrt(P_MAX) / np.linalg.norm(w)
        matrix_form = sum_rate(ch, h[:, None] * (weight_matrix(vals, 3, 4) @ w))
        assert z_objective(build_z_vectors(ch, h, w), vals, NOISE) == pytest.approx(matrix_form, rel=1e-10)


def test_element_update_dense_grid_oracle(rng):
    n = 6
    a = crandn(rng, n, 1) * 1e-4
    h = np.ones(n)
    w = np.array([[1.0 + 0.5j], [0.3 - 1j]]) * 1e-3
    z = build_z_vectors(NearFieldChannel(a, NOISE, 0.01), h, w)
    q_bar = lorentzian_weight(rng.uniform(0, 2 * np.pi, n))
    for index in (0, 4):
        phi = element_1d_update(q_bar, index, z, NOISE)
        grid = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
        trial = np.repeat(q_bar[None], grid.size, axis=0)
        trial[:, index] = lorentzian_weight(grid)
        values = np.log2(1 + np.abs(trial @ z[0, 0].conj()) ** 2 / NOISE)
        best = q_bar.copy()
        best[index] = lorentzian_weight(phi)
        assert z_objective(z, best, NOISE) >= values.max() - 1e-9


def test_element_update_isolated_element():
    z = np.zeros((1, 1, 5), dtype=complex)
    z[0, 0, 2] = 1e-3
    q_bar = lorentzian_weight(np.zeros(5))
    phi = element_1d_update(q_bar, 2, z, NOISE)
    assert phi == pytest.approx(np.pi / 2, abs=1e-5)


def test_element_update_never_worse(rng):
    a = crandn(rng, 8, 2) * 1e-4
    h = np.exp(-1j * rng.uniform(0, 3, 8))
    w = crandn(rng, 2, 2) * 1e-3
    z = build_z_vectors(NearFieldChannel(a, NOISE, 0.01), h, w)
    q_bar = lorentzian_weight(rng.uniform(0, 2 * np.pi, 8))
    for index in range(8):
        before = z_objective(z, q_bar, NOISE)
        q_bar[index] = lorentzian_weight(element_1d_update(q_bar, index, z, NOISE, grid_points=12))
        assert z_objective(z, q_bar, NOISE) >= before - 1e-12


def test_solve_dma_single_user_dispatch(wavelength):
    geom, params, ch = dma_setup(wavelength)
    a = solve_dma(ch, geom, params, P_MAX)
    b = single_user_weights(ch, geom, params, P_MAX)
    np.testing.assert_array_equal(a.phi, b.phi)
    np.testing.assert_array_equal(a.w, b.w)


def test_solve_dma_two_users(wavelength):
    geom, params, ch = dma_setup(wavelength, fractions=(0.1, 0.4))
    sol = solve_dma(ch, geom, params, P_MAX)
    assert np.all(np.diff(sol.trace) >= -1e-9)
    assert np.all(rate_per_user(ch, sol.effective) > 0)
    assert np.max(np.abs(np.abs(sol.q_bar - 0.5j) - 0.5)) <= 1e-12
    q = sol.q
    mask = weight_matrix(np.ones(geom.n_elements), geom.n_rows, geom.n_cols) != 0
    assert np.all(q[~mask] == 0)
    assert sol.power <= P_MAX * (1 + 1e-9)
    assert sum_rate(ch, sol.effective) == pytest.approx(sol.trace[-1], rel=1e-9)
    scaled = solve_dma(ch, geom, params, P_MAX, outer_rounds=1, scale_transmit=True)
    assert scaled.transmit_power == pytest.approx(P_MAX, rel=1e-9)


def test_solve_dma_needs_dma_geometry(wavelength):
    geom = square_array(0.02, 0.5)
    ch = build_channel(boresight_users(0.02, [0.2]), geom, wavelength, 2, NOISE)
    with pytest.raises(DomainError):
        solve_dma(ch, geom, DmaParams.from_geometry(geom), P_MAX)
