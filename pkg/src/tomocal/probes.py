"""Deterministic probe-state ensembles on the Bloch sphere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qubit import PureState, state_from_angles

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

KINDS = ("pauli6", "cube8", "icosahedron12", "latlon", "fibonacci")


@dataclass(frozen=True)
class ProbeSet:
    kind: str
    states: tuple

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    @property
    def bloch(self) -> np.ndarray:
        return np.array([_angles_to_vector(s.theta, s.phi) for s in self.states])

    @property
    def angles(self) -> np.ndarray:
        """(theta, phi) pairs in radians, shape (n, 2)."""
        return np.array([(s.theta, s.phi) for s in self.states])

    def projectors(self) -> np.ndarray:
        return np.array([s.projector() for s in self.states])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "angles": [[float(t), float(p)] for t, p in self.angles]}

    @classmethod
    def from_dict(cls, data: dict) -> "ProbeSet":
        states = tuple(state_from_angles(t, p) for t, p in data["angles"])
        return cls(data["kind"], states)


def _angles_to_vector(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def _from_vectors(kind: str, vectors: np.ndarray) -> ProbeSet:
    vectors = np.asarray(vectors, dtype=float)
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    states = []
    for x, y, z in vectors:
        theta = float(np.arccos(np.clip(z, -1.0, 1.0)))
        phi = float(np.arctan2(y, x) % (2 * np.pi)) if np.hypot(x, y) > 1e-15 else 0.0
        states.append(state_from_angles(theta, phi))
    return ProbeSet(kind, tuple(states))


def fibonacci_vectors(n: int) -> np.ndarray:
    """Fibonacci lattice with midpoint z-offsets (no point on the poles)."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(1.0 - z * z)
    phi = i * GOLDEN_ANGLE
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def icosahedron_vectors() -> np.ndarray:
    g = (1.0 + np.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-g, g):
            verts += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    return np.array(verts)


def cube_vectors() -> np.ndarray:
    return np.array([(x, y, z) for x in (1, -1) for y in (1, -1) for z in (1, -1)], dtype=float)


def latlon_angles(n: int) -> np.ndarray:
    """Poles plus a uniform ``rings x longitudes`` grid in ``(theta, phi)``.

    ``n - 2 = rings * longitudes`` where ``longitudes`` is the smallest divisor of
    ``n - 2`` not below ``sqrt(n - 2)``.  Rings sit at ``theta = k pi / (rings + 1)``
    and every ring uses the same longitudes ``phi = 2 pi q / longitudes``, so
    ``latlon14`` is 3 rings of 4 and ``latlon22`` is 4 rings of 5.
    """
    if n < 2:
        raise ValueError("latlon needs n >= 2")
    rest = n - 2
    if rest == 0:
        return np.array([[0.0, 0.0], [np.pi, 0.0]])
    longitudes = next(m for m in range(int(np.ceil(np.sqrt(rest))), rest + 1) if rest % m == 0)
    rings = rest // longitudes
    pts = [(0.0, 0.0)]
    for k in range(1, rings + 1):
        theta = k * np.pi / (rings + 1)
        pts += [(theta, 2 * np.pi * q / longitudes) for q in range(longitudes)]
    pts.append((np.pi, 0.0))
    return np.array(pts)


def probe_set(kind: str, n: int | None = None) -> ProbeSet:
    """Probe ensemble of the given ``kind``.

    ``pauli6``, ``cube8`` and ``icosahedron12`` take no count; ``latlon`` and
    ``fibonacci`` require ``n >= 2``.
    """
    if kind == "pauli6":
        vecs = np.vstack([np.eye(3), -np.eye(3)])[[0, 3, 1, 4, 2, 5]]
        return _from_vectors(kind, vecs)
    if kind == "cube8":
        return _from_vectors(kind, cube_vectors())
    if kind == "icosahedron12":
        return _from_vectors(kind, icosahedron_vectors())
    if kind in ("latlon", "fibonacci"):
        if n is None or n < 2:
            raise ValueError(f"{kind} probe set needs a count n >= 2")
        if kind == "fibonacci":
            return _from_vectors(f"fibonacci{n}", fibonacci_vectors(n))
        states = tuple(state_from_angles(t, p) for t, p in latlon_angles(n))
        return ProbeSet(f"latlon{n}", states)
    raise ValueError(f"unknown probe kind {kind!r}")


def parse_probe_spec(spec: str) -> ProbeSet:
    """``'fibonacci30'``, ``'latlon14'``, ``'cube8'`` ... -> :class:`ProbeSet`."""
    for kind in ("pauli6", "cube8", "icosahedron12"):
        if spec == kind:
            return probe_set(kind)
    for kind in ("latlon", "fibonacci"):
        if spec.startswith(kind) and spec[len(kind):].isdigit():
            return probe_set(kind, int(spec[len(kind):]))
    raise ValueError(f"unknown probe specification {spec!r}")


def mixed_probes(probes: ProbeSet, purity: float) -> np.ndarray:
    """Density matrices of the probes with uniformly shrunk Bloch vectors."""
    if not 0.5 <= purity <= 1.0:
        raise ValueError("purity must lie in [0.5, 1]")
    scale = np.sqrt(2 * purity - 1)
    rhos = []
    for s in probes.states:
        v = scale * _angles_to_vector(s.theta, s.phi)
        rhos.append(0.5 * np.array([[1 + v[2], v[0] - 1j * v[1]], [v[0] + 1j * v[1], 1 - v[2]]]))
    return np.array(rhos)


def closest_probe(probes: ProbeSet, theta: float, phi: float) -> int:
    """Index of the probe nearest (greatest Bloch overlap) to the point (theta, phi)."""
    return int(np.argmax(probes.bloch @ _angles_to_vector(theta, phi)))


__all__ = ["ProbeSet", "PureState", "probe_set", "parse_probe_spec", "mixed_probes",
           "closest_probe", "fibonacci_vectors", "latlon_angles", "KINDS"]
