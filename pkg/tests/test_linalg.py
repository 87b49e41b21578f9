import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulserecon.linalg import (NotHermitianError, expm_neg_i, expm_series, fidelity,
                               hermitian_eig, hs_inner, is_unitary)

from conftest import random_hermitian, random_unitary

seeds = st.integers(0, 2**32 - 1)
SX = np.array([[0, 1], [1, 0]], dtype=complex)


def test_eig_diagonal():
    w, V = hermitian_eig(np.diag([2.0, 5.0]))
    assert np.allclose(w, [2, 5], atol=1e-14)
    assert np.allclose(np.abs(V), np.eye(2), atol=1e-14)


def test_eig_sigma_x():
    w, _ = hermitian_eig(SX)
    assert np.allclose(w, [-1, 1], atol=1e-14)


def test_eig_reassembles_random(rng):
    H = random_hermitian(rng, 3)
    w, V = hermitian_eig(H)
    assert np.all(np.diff(w) >= 0)
    assert np.max(np.abs(V @ np.diag(w) @ V.conj().T - H)) < 1e-12


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_expm_zero_scale(rng):
    assert np.allclose(expm_neg_i(random_hermitian(rng, 3), 0.0), np.eye(3), atol=1e-15)


def test_expm_half_period_sigma_x():
    assert np.allclose(expm_neg_i(SX, np.pi / 2), -1j * SX, atol=1e-14)


def test_expm_matches_series_oracle(rng):
    H = random_hermitian(rng, 3)
    U = expm_neg_i(H, 0.37)
    assert np.max(np.abs(U - expm_series(-0.37j * H))) < 1e-10
    assert is_unitary(U)


def test_hs_inner_examples():
    I = np.eye(2)
    assert hs_inner(I, I) == pytest.approx(1)
    assert hs_inner(I, np.diag([1.0, -1.0])) == pytest.approx(0)
    phi = 0.7
    assert hs_inner(I, np.exp(1j * phi) * I) == pytest.approx(np.exp(1j * phi))
    with pytest.raises(ValueError):
        hs_inner(I, np.eye(3))


def test_fidelity_examples(rng):
    U = random_unitary(rng, 3)
    assert fidelity(U, U) == pytest.approx(1, abs=1e-14)
    assert fidelity(np.eye(2), np.diag([1.0, -1.0])) == pytest.approx(0, abs=1e-15)
    assert fidelity(np.eye(2), np.exp(0.3j) * np.eye(2)) == pytest.approx(1, abs=1e-15)
    with pytest.raises(ValueError):
        fidelity(np.eye(2), np.eye(3))


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(1, 5), s=st.floats(-5, 5), t=st.floats(-5, 5))
def test_semigroup(seed, n, s, t):
    H = random_hermitian(np.random.default_rng(seed), n)
    lhs = expm_neg_i(H, s) @ expm_neg_i(H, t)
    assert np.max(np.abs(lhs - expm_neg_i(H, s + t))) < 1e-10


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(1, 5), phi=st.floats(-10, 10))
def test_fidelity_symmetric_and_phase_invariant(seed, n, phi):
    rng = np.random.default_rng(seed)
    U, V = random_unitary(rng, n), random_unitary(rng, n)
    f = fidelity(U, V)
    assert 0 <= f <= 1
    assert fidelity(V, U) == pytest.approx(f, abs=1e-14)
    # the phase cancels inside |.|^2; equality holds to rounding of the complex product
    assert fidelity(U, np.exp(1j * phi) * V) == pytest.approx(f, abs=1e-14)
    assert fidelity(np.exp(1j * phi) * U, V) == pytest.approx(f, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(1, 5), c=st.floats(-3, 3))
def test_eig_shift(seed, n, c):
    H = random_hermitian(np.random.default_rng(seed), n)
    w0, _ = hermitian_eig(H)
    w1, _ = hermitian_eig(H + c * np.eye(n))
    assert np.max(np.abs(w1 - (w0 + c))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(1, 6), s=st.floats(-20, 20))
def test_exponential_unitary(seed, n, s):
    assert is_unitary(expm_neg_i(random_hermitian(np.random.default_rng(seed), n), s), atol=1e-10)


@pytest.mark.parametrize("phase", [1j, -1, -1j])
def test_fidelity_quarter_turn_phase_bitwise(rng, phase):
    U, V = random_unitary(rng, 3), random_unitary(rng, 3)
    assert fidelity(U, phase * V) == fidelity(U, V)
