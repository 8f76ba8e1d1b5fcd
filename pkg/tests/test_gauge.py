import numpy as np
import pytest
from hypothesis import given, strategies as st

from tomocal.gauge import (IllConditionedError, apply_gauge, gauge_unitary, quaternion_to_rotation,
                           quaternion_to_unitary, unitary_to_rotation, wahba_quaternion,
                           z_rotation_angle)
from tomocal.qubit import (I2, bloch_rotation_matrix, dagger, fidelity_pure, is_unitary,
                           pauli_rotation, random_unitary, state_from_angles)

A = state_from_angles(np.pi / 2, 0.0)
B = state_from_angles(np.pi / 2, np.pi / 3)


def test_identity_when_aligned():
    w = gauge_unitary([A.projector(), B.projector()], [A, B])
    assert abs(abs(np.trace(w)) / 2 - 1) < 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_recovers_inverse_rotation(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng)
    recon = [u @ s.projector() @ dagger(u) for s in (A, B)]
    w = gauge_unitary(recon, [A, B])
    assert is_unitary(w, 1e-10)
    o = bloch_rotation_matrix(w)
    assert np.linalg.det(o) == pytest.approx(1, abs=1e-9)
    assert np.allclose(o, bloch_rotation_matrix(dagger(u)), atol=1e-6)


def test_mixed_references_are_normalized():
    u = pauli_rotation("x", 0.4)
    recon = [u @ (0.9 * s.projector() + 0.05 * I2) @ dagger(u) for s in (A, B)]
    w = gauge_unitary(recon, [A, B])
    fixed = apply_gauge(w, recon)
    assert fidelity_pure(A, fixed[0]) == pytest.approx(0.95, abs=1e-9)


def test_ill_conditioned_pairs():
    with pytest.raises(IllConditionedError):
        gauge_unitary([A.projector(), A.projector()], [A, A])
    anti = state_from_angles(np.pi / 2, np.pi)
    with pytest.raises(IllConditionedError):
        gauge_unitary([A.projector(), anti.projector()], [A, anti])
    with pytest.raises(IllConditionedError):
        gauge_unitary([I2 / 2, B.projector()], [A, B])
    with pytest.raises(ValueError):
        gauge_unitary([A.projector()], [A])


def test_wahba_three_vectors():
    rng = np.random.default_rng(2)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    r = quaternion_to_rotation(q)
    obs = rng.normal(size=(5, 3))
    got = quaternion_to_rotation(wahba_quaternion(obs, obs @ r.T))
    assert np.allclose(got, r, atol=1e-10)
    assert np.allclose(unitary_to_rotation(quaternion_to_unitary(q)), r, atol=1e-12)


def test_z_rotation_angle():
    assert z_rotation_angle(pauli_rotation("z", -0.3)) == pytest.approx(0.3)
