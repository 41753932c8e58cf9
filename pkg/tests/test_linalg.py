import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riegames.errors import (
    DimensionMismatch,
    NoConvergence,
    NonSymmetric,
    NotPositiveDefinite,
)
from riegames.linalg import frobenius_inner, sym_eigen, sym_func

from conftest import random_spd


def test_eigen_identity():
    dec = sym_eigen(np.eye(2))
    assert np.allclose(dec.eigenvalues, [1.0, 1.0])
    assert np.allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(2), atol=1e-12)


def test_eigen_diagonal_sorted_ascending():
    dec = sym_eigen(np.diag([3.0, -1.0]))
    assert np.allclose(dec.eigenvalues, [-1.0, 3.0])


def test_eigen_2x2_hand_oracle():
    # characteristic polynomial of [[2,1],[1,2]]: (2-l)^2 - 1 = 0 -> l = 1, 3
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    dec = sym_eigen(a)
    assert np.allclose(dec.eigenvalues, [1.0, 3.0], atol=1e-12)
    v1 = dec.eigenvectors[:, 0]
    v2 = dec.eigenvectors[:, 1]
    expect1 = np.array([1.0, -1.0]) / np.sqrt(2.0)
    expect2 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    assert min(np.linalg.norm(v1 - expect1), np.linalg.norm(v1 + expect1)) < 1e-10
    assert min(np.linalg.norm(v2 - expect2), np.linalg.norm(v2 + expect2)) < 1e-10


def test_eigen_matches_numpy(rng):
    for n in (2, 3, 5, 8):
        for _ in range(5):
            a = rng.standard_normal((n, n))
            a = 0.5 * (a + a.T)
            dec = sym_eigen(a)
            ref = np.linalg.eigvalsh(a)
            assert np.allclose(dec.eigenvalues, ref, atol=1e-10)


def test_eigen_invariants(rng):
    for _ in range(20):
        n = int(rng.integers(2, 7))
        a = rng.uniform(-1.0, 1.0, size=(n, n))
        a = 0.5 * (a + a.T)
        dec = sym_eigen(a)
        fro = max(1.0, np.linalg.norm(a))
        assert np.linalg.norm(dec.reconstruct() - a) <= 1e-10 * fro
        assert np.linalg.norm(dec.eigenvectors.T @ dec.eigenvectors - np.eye(n)) <= 1e-10
        assert abs(dec.eigenvalues.sum() - np.trace(a)) <= 1e-10 * max(1.0, abs(np.trace(a)))


def test_eigen_rejects_nonsymmetric():
    with pytest.raises(NonSymmetric):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eigen_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        sym_eigen(np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        sym_eigen(np.zeros((1, 1)))
    with pytest.raises(DimensionMismatch):
        sym_eigen(np.zeros((65, 65)))


def test_eigen_sweep_cap_raises():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    with pytest.raises(NoConvergence):
        sym_eigen(a, max_sweeps=0)


def test_eigen_zero_matrix():
    dec = sym_eigen(np.zeros((3, 3)))
    assert np.allclose(dec.eigenvalues, 0.0)


def test_sym_func_exp_zero_is_identity():
    assert np.allclose(sym_func(np.zeros((2, 2)), "exp"), np.eye(2))


def test_sym_func_log_diagonal():
    assert np.allclose(sym_func(np.diag([np.e, 1.0]), "log"), np.diag([1.0, 0.0]), atol=1e-12)


def test_sym_func_sqrt_squares_back():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    r = sym_func(a, "sqrt")
    assert np.allclose(r @ r, a, atol=1e-10)


def test_sym_func_power_and_inv_sqrt(rng):
    a = random_spd(rng, 4)
    half = sym_func(a, "power", exponent=0.5)
    assert np.allclose(half, sym_func(a, "sqrt"), atol=1e-10)
    isq = sym_func(a, "inv_sqrt")
    assert np.allclose(isq @ a @ isq, np.eye(4), atol=1e-9)


def test_sym_func_rejects_nonpositive():
    with pytest.raises(NotPositiveDefinite):
        sym_func(np.diag([1.0, 0.0]), "log")
    with pytest.raises(NotPositiveDefinite):
        sym_func(np.diag([1.0, -2.0]), "sqrt")


def test_sym_func_bad_name():
    with pytest.raises(ValueError):
        sym_func(np.eye(2), "cube")
    with pytest.raises(ValueError):
        sym_func(np.eye(2), "power")


def test_log_exp_round_trip(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        a = rng.uniform(-1.0, 1.0, size=(n, n))
        a = 0.5 * (a + a.T)
        lam_min = float(np.linalg.eigvalsh(a).min())
        a_spd = a + (abs(lam_min) + 1.0) * np.eye(n)
        back = sym_func(sym_func(a_spd, "log"), "exp")
        assert np.linalg.norm(back - a_spd) <= 1e-8 * max(1.0, np.linalg.norm(a_spd))


def test_frobenius_inner_values():
    assert frobenius_inner(np.eye(2), np.eye(2)) == 2.0
    assert frobenius_inner(np.array([[1.0, 2.0], [2.0, 0.0]]), np.zeros((2, 2))) == 0.0
    # hand summation: 1*0 + 2*1 + 2*1 + 0*3 = 4
    a = np.array([[1.0, 2.0], [2.0, 0.0]])
    b = np.array([[0.0, 1.0], [1.0, 3.0]])
    assert frobenius_inner(a, b) == 4.0


def test_frobenius_inner_mismatch():
    with pytest.raises(DimensionMismatch):
        frobenius_inner(np.eye(2), np.eye(3))


def test_eigen_at_max_supported_size():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((64, 64))
    a = 0.5 * (a + a.T)
    dec = sym_eigen(a)
    assert np.abs(dec.eigenvalues - np.linalg.eigvalsh(a)).max() <= 1e-10
    assert np.linalg.norm(dec.reconstruct() - a) <= 1e-10 * np.linalg.norm(a)


@settings(deadline=None, max_examples=40)
@given(st.integers(min_value=0, max_value=10_000))
def test_eigen_trace_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    a = 0.5 * (a + a.T)
    dec = sym_eigen(a)
    assert abs(dec.eigenvalues.sum() - np.trace(a)) <= 1e-10 * max(1.0, abs(np.trace(a)))
    assert np.allclose(dec.eigenvalues, np.linalg.eigvalsh(a), atol=1e-9)
