import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nearfocus.errors import SingularMatrix
from nearfocus.numerics import frobenius_norm, hermitian_solve, kron, unvec, vec


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_kron_identity_left():
    b = np.array([[1 + 2j, 3], [0, -1j]])
    np.testing.assert_array_equal(kron(np.eye(1), b), b)


def test_kron_scalar_scaling():
    np.testing.assert_array_equal(kron([[2]], [[0, 1], [1, 0]]), [[0, 2], [2, 0]])


def test_kron_against_index_loop(rng):
    a, b = crandn(rng, 2, 2), crandn(rng, 2, 3)
    out = kron(a, b)
    assert out.shape == (4, 6)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for m in range(3):
                    assert abs(out[i * 2 + k, j * 3 + m] - a[i, j] * b[k, m]) <= 1e-15 * abs(a[i, j] * b[k, m])


def test_kron_bilinear(rng):
    a, b = crandn(rng, 3, 2), crandn(rng, 2, 4)
    alpha = 0.3 - 1.7j
    np.testing.assert_allclose(kron(alpha * a, b), alpha * kron(a, b), atol=1e-12)


def test_vec_is_column_major():
    np.testing.assert_array_equal(vec([[1, 2], [3, 4]]), [1, 3, 2, 4])
    np.testing.assert_array_equal(vec([[5 + 1j]]), [5 + 1j])


def test_vec_unvec_roundtrip(rng):
    m = crandn(rng, 3, 5)
    np.testing.assert_array_equal(unvec(vec(m), 3, 5), m)


def test_vec_rejects_vectors():
    with pytest.raises(ValueError):
        vec(np.ones(3))


def test_bilinear_identity_3x4(rng):
    x, q, y = crandn(rng, 3), crandn(rng, 3, 4), crandn(rng, 4)
    lhs = x @ q @ y
    rhs = kron(y[None, :], x[None, :]) @ vec(q)
    assert abs(lhs - rhs[0]) <= 1e-12 * (1 + abs(lhs))


def test_bilinear_identity_fails_row_major(rng):
    x, q, y = crandn(rng, 3), crandn(rng, 3, 4), crandn(rng, 4)
    rhs = kron(y[None, :], x[None, :]) @ q.ravel()
    assert abs(x @ q @ y - rhs[0]) > 1e-6


@settings(max_examples=200, deadline=None)
@given(rows=st.integers(1, 8), cols=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_bilinear_identity_property(rows, cols, seed):
    r = np.random.default_rng(seed)
    x, q, y = crandn(r, rows), crandn(r, rows, cols), crandn(r, cols)
    lhs = x @ q @ y
    rhs = (kron(y[None, :], x[None, :]) @ vec(q))[0]
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_hermitian_solve_identity_and_scaled(rng):
    v = crandn(rng, 4)
    np.testing.assert_allclose(hermitian_solve(np.eye(4), v), v, atol=1e-15)
    np.testing.assert_allclose(hermitian_solve(2 * np.eye(4), v), v / 2, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_hermitian_solve_residual(n, seed):
    r = np.random.default_rng(seed)
    g = crandn(r, n, n)
    a = g @ g.conj().T + 0.1 * np.eye(n)
    b = crandn(r, n)
    x = hermitian_solve(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_hermitian_solve_matrix_rhs(rng):
    g = crandn(rng, 5, 5)
    a = g @ g.conj().T + np.eye(5)
    b = crandn(rng, 5, 3)
    np.testing.assert_allclose(a @ hermitian_solve(a, b), b, atol=1e-10)


def test_hermitian_solve_singular():
    with pytest.raises(SingularMatrix):
        hermitian_solve(np.diag([1.0, 0.0]), np.ones(2))
    with pytest.raises(SingularMatrix):
        hermitian_solve(np.diag([1.0, 1e-16]), np.ones(2))
    with pytest.raises(SingularMatrix):
        hermitian_solve(np.diag([1.0, -1.0]), np.ones(2))


def test_frobenius_norm(rng):
    assert frobenius_norm(np.zeros((3, 2))) == 0.0
    assert frobenius_norm([[3, 4]]) == 5.0
    m = crandn(rng, 4, 3)
    total = 0.0
    for value in m.ravel():
        total += value.real**2 + value.imag**2
    assert frobenius_norm(m) == pytest.approx(np.sqrt(total), rel=1e-14)
