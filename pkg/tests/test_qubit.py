import numpy as np
import pytest
from hypothesis import given, strategies as st

from tomocal.qubit import (I2, KET0, KET1, SX, SZ, PureState, bloch_rotation_matrix, bloch_vector,
                           born_probability, check_density_matrix, check_effect, dagger,
                           density_from_bloch, fidelity_pure, is_unitary, ketbra, pauli_rotation,
                           purity, random_pure_state, random_unitary, state_from_angles,
                           trace_distance, waveplate_unitary)

angles = st.floats(-10, 10, allow_nan=False)
PLUS = np.array([1, 1], complex) / np.sqrt(2)


def test_pauli_rotation_examples():
    assert np.allclose(pauli_rotation("y", 0.0), I2, atol=1e-15)
    assert np.allclose(pauli_rotation("y", np.pi), [[0, 1], [-1, 0]], atol=1e-15)
    assert np.allclose(pauli_rotation("z", np.pi), np.diag([1j, -1j]), atol=1e-15)


def test_pauli_rotation_rejects_bad_input():
    with pytest.raises(ValueError):
        pauli_rotation("w", 0.1)
    with pytest.raises(ValueError):
        pauli_rotation("y", np.nan)


@given(st.sampled_from("xyz"), angles)
def test_rotation_inverse(axis, a):
    prod = pauli_rotation(axis, a) @ pauli_rotation(axis, -a)
    assert np.allclose(prod, I2, atol=1e-12)


def test_waveplate_examples():
    assert np.allclose(waveplate_unitary(0.0, np.pi), SZ, atol=1e-15)
    w = waveplate_unitary(np.pi / 4, np.pi)
    # sigma_x up to a global phase
    assert abs(abs(np.trace(dagger(SX) @ w)) / 2 - 1) < 1e-12
    for a in (0.3, -1.2, 2.0):
        assert np.allclose(waveplate_unitary(a, 0.0), I2, atol=1e-15)


@given(angles)
def test_half_wave_plate_is_involution(a):
    w = waveplate_unitary(a, np.pi)
    assert np.allclose(w @ w, I2, atol=1e-12)


@given(angles, angles)
def test_waveplate_is_unitary(a, g):
    assert is_unitary(waveplate_unitary(a, g))


def test_state_from_angles_examples():
    assert fidelity_pure(state_from_angles(0.0, 1.3), ketbra(KET0)) == pytest.approx(1, abs=1e-15)
    assert fidelity_pure(state_from_angles(np.pi, 0.0), ketbra(KET1)) == pytest.approx(1, abs=1e-15)
    s = state_from_angles(np.pi / 2, np.pi / 2)
    assert np.allclose(s.ket, np.array([1, 1j]) / np.sqrt(2), atol=1e-15)
    with pytest.raises(ValueError):
        state_from_angles(4.0, 0.0)
    with pytest.raises(ValueError):
        state_from_angles(np.inf, 0.0)


def test_pure_state_requires_normalization():
    with pytest.raises(ValueError):
        PureState(np.array([1.0, 1.0]))
    s = PureState.from_ket([0, 2j])
    assert s.theta == pytest.approx(np.pi)


def test_bloch_vector_examples():
    assert np.allclose(bloch_vector(I2 / 2), 0)
    assert np.allclose(bloch_vector(ketbra(KET0)), [0, 0, 1])
    assert np.allclose(bloch_vector(ketbra(PLUS)), [1, 0, 0])


def test_purity_examples():
    assert purity(ketbra(KET0)) == pytest.approx(1)
    assert purity(I2 / 2) == pytest.approx(0.5)
    assert purity(density_from_bloch([0.6, 0, 0])) == pytest.approx(0.68)


def test_fidelity_examples():
    s0 = state_from_angles(0, 0)
    assert fidelity_pure(s0, ketbra(KET0)) == pytest.approx(1)
    assert fidelity_pure(s0, ketbra(KET1)) == pytest.approx(0)
    assert fidelity_pure(s0, I2 / 2) == pytest.approx(0.5)


def test_born_examples():
    p0 = ketbra(KET0)
    assert born_probability(p0, p0) == pytest.approx(1)
    assert born_probability(p0, ketbra(PLUS)) == pytest.approx(0.5)
    assert born_probability(I2 / 2, ketbra(PLUS)) == pytest.approx(0.5)


@given(st.integers(0, 2 ** 32 - 1))
def test_random_pure_properties(seed):
    rng = np.random.default_rng(seed)
    rho = random_pure_state(rng).projector()
    assert purity(rho) == pytest.approx(1, abs=1e-10)
    assert np.linalg.norm(bloch_vector(rho)) == pytest.approx(1, abs=1e-10)
    e = random_pure_state(rng).projector()
    assert born_probability(rho, e) + born_probability(rho, I2 - e) == pytest.approx(1, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_bloch_rotation_matches_conjugation(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng)
    assert is_unitary(u)
    o = bloch_rotation_matrix(u)
    assert np.linalg.det(o) == pytest.approx(1, abs=1e-9)
    rho = random_pure_state(rng).projector()
    assert np.allclose(bloch_vector(u @ rho @ dagger(u)), o @ bloch_vector(rho), atol=1e-12)


def test_checks_reject_invalid_operators():
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[1, 0.2], [0, 0]]))
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        check_effect(2 * I2)
    assert check_effect(ketbra(KET0)).shape == (2, 2)


def test_trace_distance():
    assert trace_distance(ketbra(KET0), ketbra(KET1)) == pytest.approx(1)
    assert trace_distance(ketbra(KET0), I2 / 2) == pytest.approx(0.5)
