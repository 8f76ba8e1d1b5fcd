"""Fixing the unitary gauge from two known, non-orthogonal reference states.

The best rotation mapping reconstructed Bloch vectors onto the ideal ones is
found with Davenport's q-method (the quaternion solution of Wahba's problem)
and converted to the SU(2) unitary that induces it.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .qubit import SX, SY, SZ, I2, PureState, bloch_vector, dagger


class IllConditionedError(ValueError):
    """Input geometry does not determine the requested quantity."""


def wahba_quaternion(observed: np.ndarray, reference: np.ndarray,
                     weights: Sequence[float] | None = None) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` of the rotation ``O`` minimizing
    ``sum_i w_i |reference_i - O observed_i|^2``.
    """
    obs = np.asarray(observed, dtype=float)
    ref = np.asarray(reference, dtype=float)
    w = np.ones(len(obs)) if weights is None else np.asarray(weights, dtype=float)
    b = np.einsum("i,ij,ik->jk", w, obs, ref)
    s = b + b.T
    sigma = np.trace(b)
    z = np.array([b[1, 2] - b[2, 1], b[2, 0] - b[0, 2], b[0, 1] - b[1, 0]])
    k = np.zeros((4, 4))
    k[0, 0] = sigma
    k[0, 1:] = z
    k[1:, 0] = z
    k[1:, 1:] = s - sigma * np.eye(3)
    vals, vecs = np.linalg.eigh(k)
    q = vecs[:, np.argmax(vals)]
    return q if q[0] >= 0 else -q


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quaternion_to_unitary(q: np.ndarray) -> np.ndarray:
    """``U = w I - i (x X + y Y + z Z)``, which rotates Bloch vectors by the quaternion's rotation."""
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return w * I2 - 1j * (x * SX + y * SY + z * SZ)


def gauge_unitary(recon_pair: Sequence[np.ndarray], ideal_pair: Sequence[PureState],
                  min_angle_deg: float = 10.0) -> np.ndarray:
    """Unitary ``W`` aligning two reconstructed states with their known ideals.

    Parameters
    ----------
    recon_pair : two density matrices
    ideal_pair : two pure states whose Bloch vectors are separated by an angle in
        ``[min_angle_deg, 180 - min_angle_deg]``.

    Returns
    -------
    W : (2, 2) unitary such that ``W rho W^dag`` is best aligned with the ideals.
    """
    if len(recon_pair) != 2 or len(ideal_pair) != 2:
        raise ValueError("gauge fixing takes exactly two reference states")
    ideal = np.array([s.bloch() if isinstance(s, PureState) else bloch_vector(s)
                      for s in ideal_pair])
    ideal /= np.linalg.norm(ideal, axis=1, keepdims=True)
    angle = np.degrees(np.arccos(np.clip(ideal[0] @ ideal[1], -1.0, 1.0)))
    if not min_angle_deg <= angle <= 180.0 - min_angle_deg:
        raise IllConditionedError(
            f"reference states are {angle:.2f} deg apart on the Bloch sphere; "
            "the rotation about their common axis is undetermined")
    recon = np.array([bloch_vector(r) for r in recon_pair])
    norms = np.linalg.norm(recon, axis=1, keepdims=True)
    if np.any(norms < 1e-9):
        raise IllConditionedError("a reconstructed reference state is maximally mixed")
    recon /= norms
    return quaternion_to_unitary(wahba_quaternion(recon, ideal))


def apply_gauge(w: np.ndarray, rhos) -> np.ndarray:
    rhos = np.asarray(rhos, dtype=complex)
    return w @ rhos @ dagger(w)


def z_rotation_angle(w: np.ndarray) -> float:
    """Azimuthal angle by which the Bloch map of ``w`` turns the x axis about z."""
    r = unitary_to_rotation(w)
    return float(np.arctan2(r[1, 0], r[0, 0]))


def unitary_to_rotation(w: np.ndarray) -> np.ndarray:
    """SO(3) matrix of ``rho -> w rho w^dag`` acting on Bloch vectors."""
    w = np.asarray(w, dtype=complex)
    paulis = (SX, SY, SZ)
    return np.array([[0.5 * np.real(np.trace(a @ w @ b @ dagger(w))) for b in paulis]
                     for a in paulis])
