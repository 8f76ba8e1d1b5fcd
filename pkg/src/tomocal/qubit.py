"""Exact 2x2 linear algebra for a single qubit.

Operators are plain ``numpy`` arrays of shape ``(2, 2)`` and dtype complex128.
Rotations follow the convention ``R_j(a) = exp(+i sigma_j a / 2)``; every other
module builds rotations through :func:`pauli_rotation` so the sign convention
lives in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conjugate(np.swapaxes(m, -1, -2))


def ketbra(ket: np.ndarray, bra: np.ndarray | None = None) -> np.ndarray:
    """Outer product ``|ket><bra|`` (``bra`` defaults to ``ket``)."""
    if bra is None:
        bra = ket
    return np.outer(ket, np.conjugate(bra))


def _check_finite(*values: float) -> None:
    for v in values:
        if not np.isfinite(v):
            raise ValueError(f"expected a finite angle, got {v!r}")


def pauli_rotation(axis: str, angle: float) -> np.ndarray:
    """Rotation ``exp(+i sigma_axis * angle / 2)`` about ``axis`` in {'x', 'y', 'z'}.

    >>> np.allclose(pauli_rotation("y", np.pi), [[0, 1], [-1, 0]])
    True
    """
    _check_finite(angle)
    try:
        sigma = {"x": SX, "y": SY, "z": SZ}[axis]
    except KeyError:
        raise ValueError(f"unknown rotation axis {axis!r}") from None
    return np.cos(angle / 2) * I2 + 1j * np.sin(angle / 2) * sigma


def waveplate_unitary(angle: float, retardance: float) -> np.ndarray:
    """Jones operator of a linear retarder.

    ``W = |a><a| + exp(-i retardance) |a_perp><a_perp|`` with the fast axis state
    ``|a> = cos(angle)|0> + sin(angle)|1>``.  No global phase is removed.
    """
    _check_finite(angle, retardance)
    c, s = np.cos(angle), np.sin(angle)
    fast = np.array([c, s], dtype=complex)
    slow = np.array([-s, c], dtype=complex)
    return ketbra(fast) + np.exp(-1j * retardance) * ketbra(slow)


@dataclass(frozen=True)
class PureState:
    """Normalized ket, optionally tagged with its Bloch angles (colatitude, longitude)."""

    amplitudes: np.ndarray = field(repr=False)
    theta: float | None = None
    phi: float | None = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(2)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm {norm:.3e})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_ket(cls, ket) -> "PureState":
        """Normalize ``ket`` and record its Bloch angles."""
        ket = np.asarray(ket, dtype=complex).reshape(2)
        ket = ket / np.linalg.norm(ket)
        x, y, z = bloch_vector(ketbra(ket))
        theta = float(np.arccos(np.clip(z, -1.0, 1.0)))
        phi = float(np.arctan2(y, x) % (2 * np.pi))
        return cls(ket, theta, phi)

    @property
    def ket(self) -> np.ndarray:
        return self.amplitudes

    def projector(self) -> np.ndarray:
        return ketbra(self.amplitudes)

    def bloch(self) -> np.ndarray:
        return bloch_vector(self.projector())


def state_from_angles(theta: float, phi: float) -> PureState:
    """Pure state ``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>``."""
    _check_finite(theta, phi)
    if not -1e-12 <= theta <= np.pi + 1e-12:
        raise ValueError(f"colatitude {theta} outside [0, pi]")
    theta = float(np.clip(theta, 0.0, np.pi))
    amps = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    return PureState(amps, theta, float(phi))


def density_from_bloch(vec) -> np.ndarray:
    """``(I + r.sigma) / 2``; no check that ``|r| <= 1``."""
    x, y, z = np.asarray(vec, dtype=float)
    return 0.5 * (I2 + x * SX + y * SY + z * SZ)


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """Components ``Tr(rho sigma_k)`` for k = x, y, z."""
    rho = np.asarray(rho)
    return np.array([
        2.0 * rho[0, 1].real,
        -2.0 * rho[0, 1].imag,
        (rho[0, 0] - rho[1, 1]).real,
    ])


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.sum(rho * rho.T)))


def fidelity_pure(state: PureState, rho: np.ndarray) -> float:
    """Overlap ``<psi|rho|psi>`` of a pure reference with an arbitrary state."""
    ket = state.ket if isinstance(state, PureState) else np.asarray(state, dtype=complex)
    return float(np.real(np.conjugate(ket) @ np.asarray(rho) @ ket))


def born_probability(rho: np.ndarray, effect: np.ndarray) -> float:
    """``Tr(rho E)`` clamped to [0, 1]."""
    p = float(np.real(np.sum(np.asarray(rho) * np.asarray(effect).T)))
    return min(max(p, 0.0), 1.0)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))
    return 0.5 * float(np.sum(np.abs(eig)))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.allclose(m, dagger(m), rtol=0, atol=tol))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return bool(np.allclose(u @ dagger(u), I2, rtol=0, atol=tol))


def allclose(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    """Entry-wise comparison with an explicit absolute tolerance."""
    return bool(np.allclose(a, b, rtol=0, atol=atol))


def check_density_matrix(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``rho`` as an array, raising ``ValueError`` if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2) or not np.all(np.isfinite(rho)):
        raise ValueError("density matrix must be a finite 2x2 array")
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real!r} != 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def check_effect(effect: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    effect = np.asarray(effect, dtype=complex)
    if effect.shape != (2, 2) or not np.all(np.isfinite(effect)):
        raise ValueError("effect must be a finite 2x2 array")
    if not is_hermitian(effect, tol):
        raise ValueError("effect is not Hermitian")
    eig = np.linalg.eigvalsh(effect)
    if eig.min() < -tol or eig.max() > 1 + tol:
        raise ValueError(f"effect eigenvalues {eig} outside [0, 1]")
    return effect


def bloch_rotation_matrix(u: np.ndarray) -> np.ndarray:
    """SO(3) matrix ``O`` with ``bloch(U rho U^dag) = O @ bloch(rho)``."""
    u = np.asarray(u, dtype=complex)
    out = np.empty((3, 3))
    for k, sk in enumerate(PAULIS):
        rotated = u @ sk @ dagger(u)
        for i, si in enumerate(PAULIS):
            out[i, k] = 0.5 * np.real(np.trace(si @ rotated))
    return out


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary."""
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_pure_state(rng: np.random.Generator) -> PureState:
    ket = rng.normal(size=2) + 1j * rng.normal(size=2)
    return PureState.from_ket(ket)
