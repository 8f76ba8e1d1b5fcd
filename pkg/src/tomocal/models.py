"""Measurement-operator families, waveplate preparation and angle solvers.

Four parameterized families of projective effects are supported:

* :class:`AdditiveAngles`     per-setting offsets of the y/z rotation angles (12 params)
* :class:`Multiplicative`     shared relative under/over-rotation of both angles (2 params)
* :class:`WaveplateRetardance` HWP/QWP retardance deviations (2 params)
* :class:`ChipPolynomial`     quadratic phase-vs-voltage coefficients of a path-qubit chip (6 params)

All of them produce rank-1 projectors, built from :mod:`tomocal.qubit` rotations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Sequence

import numpy as np
from scipy.optimize import minimize

from .qubit import KET0, PureState, dagger, ketbra, pauli_rotation, waveplate_unitary

HALF_PI = np.pi / 2


class SolverError(RuntimeError):
    """Numerical solver did not reach the requested accuracy."""

    def __init__(self, message: str, best_overlap: float, best_angles: tuple[float, float]):
        super().__init__(message)
        self.best_overlap = best_overlap
        self.best_angles = best_angles


# ---------------------------------------------------------------------------
# settings


@dataclass(frozen=True)
class PauliSetting:
    """Rotation angles (about y, then z) selecting one Pauli eigenprojector."""

    index: int
    theta_y: float
    phi_z: float


def pauli_settings() -> list[PauliSetting]:
    """The six Pauli-tomography settings |0>, |1>, |->, |+>, |+i>, |-i>."""
    thetas = (0.0, np.pi, HALF_PI, HALF_PI, HALF_PI, HALF_PI)
    phis = (0.0, 0.0, np.pi, 0.0, HALF_PI, 3 * HALF_PI)
    return [PauliSetting(j + 1, t, p) for j, (t, p) in enumerate(zip(thetas, phis))]


@dataclass(frozen=True)
class WaveplateSetting:
    """HWP and QWP orientations (radians) and whether they prepare or project."""

    hwp: float
    qwp: float
    role: str = "projection"

    def __post_init__(self):
        if self.role not in ("preparation", "projection"):
            raise ValueError(f"unknown waveplate role {self.role!r}")
        if not (np.isfinite(self.hwp) and np.isfinite(self.qwp)):
            raise ValueError("waveplate angles must be finite")


# Columns of the Pauli waveplate table.  With W(a, G) = |a><a| + e^{-iG}|a_perp><a_perp|
# the (x, y) columns prepare the Pauli states and (x', y') project onto them.
_PAULI_PREP_ANGLES = (
    (0.0, 0.0), (np.pi / 4, 0.0), (np.pi / 8, 0.0), (-np.pi / 8, 0.0),
    (-np.pi / 8, -np.pi / 4), (np.pi / 8, np.pi / 4),
)
_PAULI_PROJ_ANGLES = (
    (0.0, 0.0), (np.pi / 4, 0.0), (np.pi / 8, 0.0), (-np.pi / 8, 0.0),
    (np.pi / 8, np.pi / 4), (-np.pi / 8, -np.pi / 4),
)

# Pauli states in table order: H, V, D, A, R(+i), L(-i)
PAULI_TABLE_KETS = (
    np.array([1, 0], complex), np.array([0, 1], complex),
    np.array([1, 1], complex) / np.sqrt(2), np.array([1, -1], complex) / np.sqrt(2),
    np.array([1, 1j], complex) / np.sqrt(2), np.array([1, -1j], complex) / np.sqrt(2),
)


def pauli_waveplate_settings(role: str = "projection") -> list[WaveplateSetting]:
    table = _PAULI_PROJ_ANGLES if role == "projection" else _PAULI_PREP_ANGLES
    return [WaveplateSetting(x, y, role) for x, y in table]


@dataclass(frozen=True)
class ChipDrive:
    v1: float
    v2: float


# ---------------------------------------------------------------------------
# error models


@dataclass(frozen=True)
class ErrorModel:
    """Base class; concrete families expose a flat parameter vector."""

    variant: ClassVar[str] = ""
    n_params: ClassVar[int] = 0
    param_names: ClassVar[tuple[str, ...]] = ()

    @property
    def params(self) -> np.ndarray:
        raise NotImplementedError

    @classmethod
    def from_params(cls, params) -> "ErrorModel":
        raise NotImplementedError

    @classmethod
    def zero(cls) -> "ErrorModel":
        return cls.from_params(np.zeros(cls.n_params))

    @staticmethod
    def _vector(params, n: int, name: str) -> np.ndarray:
        vec = np.asarray(params, dtype=float).ravel()
        if vec.size != n:
            raise ValueError(f"{name} takes {n} parameters, got {vec.size}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"{name} parameters must be finite")
        return vec

    def to_dict(self) -> dict:
        return {"variant": self.variant, "params": [float(v) for v in self.params]}


@dataclass(frozen=True)
class AdditiveAngles(ErrorModel):
    """theta'_j = theta_j + delta_j,  phi'_j = phi_j + eps_j."""

    delta: tuple = (0.0,) * 6
    eps: tuple = (0.0,) * 6

    variant: ClassVar[str] = "additive"
    n_params: ClassVar[int] = 12
    param_names: ClassVar[tuple[str, ...]] = tuple(
        [f"delta_{j}" for j in range(1, 7)] + [f"eps_{j}" for j in range(1, 7)])

    def __post_init__(self):
        vec = self._vector(tuple(self.delta) + tuple(self.eps), 12, "AdditiveAngles")
        object.__setattr__(self, "delta", tuple(vec[:6]))
        object.__setattr__(self, "eps", tuple(vec[6:]))

    @property
    def params(self) -> np.ndarray:
        return np.array(self.delta + self.eps)

    @classmethod
    def from_params(cls, params) -> "AdditiveAngles":
        vec = cls._vector(params, 12, "AdditiveAngles")
        return cls(tuple(vec[:6]), tuple(vec[6:]))


@dataclass(frozen=True)
class Multiplicative(ErrorModel):
    """theta'_j = (1 + delta) theta_j,  phi'_j = (1 + eps) phi_j."""

    delta: float = 0.0
    eps: float = 0.0

    variant: ClassVar[str] = "multiplicative"
    n_params: ClassVar[int] = 2
    param_names: ClassVar[tuple[str, ...]] = ("delta", "eps")

    def __post_init__(self):
        self._vector((self.delta, self.eps), 2, "Multiplicative")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.delta, self.eps], dtype=float)

    @classmethod
    def from_params(cls, params) -> "Multiplicative":
        d, e = cls._vector(params, 2, "Multiplicative")
        return cls(float(d), float(e))


@dataclass(frozen=True)
class WaveplateRetardance(ErrorModel):
    """HWP retardance pi + delta, QWP retardance pi/2 + eps (radians)."""

    delta: float = 0.0
    eps: float = 0.0

    variant: ClassVar[str] = "waveplate"
    n_params: ClassVar[int] = 2
    param_names: ClassVar[tuple[str, ...]] = ("delta", "eps")

    def __post_init__(self):
        self._vector((self.delta, self.eps), 2, "WaveplateRetardance")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.delta, self.eps], dtype=float)

    @classmethod
    def from_params(cls, params) -> "WaveplateRetardance":
        d, e = cls._vector(params, 2, "WaveplateRetardance")
        return cls(float(d), float(e))


@dataclass(frozen=True)
class ChipPolynomial(ErrorModel):
    """phi_1(V1) = c1 + c2 V1 + c3 V1^2 and phi_2(V2) = c4 + c5 V2 + c6 V2^2."""

    c: tuple = (0.0,) * 6

    variant: ClassVar[str] = "chip"
    n_params: ClassVar[int] = 6
    param_names: ClassVar[tuple[str, ...]] = ("c1", "c2", "c3", "c4", "c5", "c6")

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(self._vector(self.c, 6, "ChipPolynomial")))

    @property
    def params(self) -> np.ndarray:
        return np.array(self.c, dtype=float)

    @classmethod
    def from_params(cls, params) -> "ChipPolynomial":
        return cls(tuple(cls._vector(params, 6, "ChipPolynomial")))

    def phases(self, drive: ChipDrive) -> tuple[float, float]:
        c1, c2, c3, c4, c5, c6 = self.c
        return (c1 + c2 * drive.v1 + c3 * drive.v1 ** 2,
                c4 + c5 * drive.v2 + c6 * drive.v2 ** 2)


MODEL_VARIANTS: dict[str, type[ErrorModel]] = {
    cls.variant: cls for cls in (AdditiveAngles, Multiplicative, WaveplateRetardance, ChipPolynomial)
}

# Chip coefficients: simulated truth and the initially assumed values.
CHIP_TRUTH = ChipPolynomial((-1.887, 0.105, 0.05, -1.805, 0.115, 0.05))
CHIP_INITIAL = ChipPolynomial((-1.750, 0.100, 0.050, -1.800, 0.1105, 0.050))


def model_from_params(variant: str, params) -> ErrorModel:
    try:
        cls = MODEL_VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown error-model variant {variant!r}") from None
    return cls.from_params(params)


# ---------------------------------------------------------------------------
# effect construction


def rotation_projector(theta_y: float, phi_z: float) -> np.ndarray:
    """R_z^dag(phi) R_y^dag(theta) |0><0| R_y(theta) R_z(phi)."""
    u = pauli_rotation("y", theta_y) @ pauli_rotation("z", phi_z)
    ket = dagger(u) @ KET0
    return ketbra(ket)


def projection_unitary(setting: WaveplateSetting, deviation=(0.0, 0.0)) -> np.ndarray:
    """Measurement stage: light meets the HWP, then the QWP, then an H polarizer."""
    delta, eps = deviation
    return waveplate_unitary(setting.qwp, HALF_PI + eps) @ waveplate_unitary(setting.hwp, np.pi + delta)


def preparation_unitary(setting: WaveplateSetting, deviation=(0.0, 0.0)) -> np.ndarray:
    """Preparation stage: |0> passes the QWP first, then the HWP."""
    delta, eps = deviation
    return waveplate_unitary(setting.hwp, np.pi + delta) @ waveplate_unitary(setting.qwp, HALF_PI + eps)


def waveplate_effect(setting: WaveplateSetting, deviation=(0.0, 0.0)) -> np.ndarray:
    """Projector realized by a waveplate pair in its role.

    For a projection setting this is ``U^dag |0><0| U``; for a preparation setting
    it is the prepared state ``P |0><0| P^dag`` (used when roles are reversed).
    """
    if setting.role == "projection":
        u = projection_unitary(setting, deviation)
        return ketbra(dagger(u) @ KET0)
    return ketbra(preparation_unitary(setting, deviation) @ KET0)


def chip_unitary(phi1: float, phi2: float) -> np.ndarray:
    """Input phase shifter ``phi2``, then a Mach-Zehnder with internal phase ``phi1``.

    Both couplers are the symmetric 50:50 matrix ``[[1, i], [i, 1]] / sqrt(2)``.
    """
    coupler = np.array([[1, 1j], [1j, 1]], dtype=complex) / np.sqrt(2)
    return coupler @ np.diag([1, np.exp(1j * phi1)]) @ coupler @ np.diag([1, np.exp(1j * phi2)])


def chip_effect(phi1: float, phi2: float) -> np.ndarray:
    """Detection in the upper output path: projector onto colatitude ``pi - phi1``, longitude ``pi - phi2``."""
    u = chip_unitary(phi1, phi2)
    return ketbra(dagger(u) @ KET0)


def effects_from_model(model: ErrorModel, settings: Sequence | None = None,
                       drives: Sequence[ChipDrive] | None = None) -> np.ndarray:
    """Effects realized by ``model`` as an array of shape ``(n_settings, 2, 2)``.

    ``settings`` defaults to the Pauli rotation table (additive, multiplicative) or
    the Pauli projection waveplate table (waveplate).  The chip family is driven by
    ``drives`` instead.
    """
    if isinstance(model, ChipPolynomial):
        if not drives:
            raise ValueError("chip model requires a non-empty list of drives")
        return np.array([chip_effect(*model.phases(d)) for d in drives])

    if isinstance(model, WaveplateRetardance):
        settings = pauli_waveplate_settings() if settings is None else list(settings)
        if not settings:
            raise ValueError("no waveplate settings given")
        dev = (model.delta, model.eps)
        return np.array([waveplate_effect(s, dev) for s in settings])

    settings = pauli_settings() if settings is None else list(settings)
    if isinstance(model, AdditiveAngles):
        if len(settings) != 6:
            raise ValueError(f"additive model needs 6 settings, got {len(settings)}")
        angles = [(s.theta_y + d, s.phi_z + e) for s, d, e in zip(settings, model.delta, model.eps)]
    elif isinstance(model, Multiplicative):
        if not settings:
            raise ValueError("no settings given")
        angles = [((1 + model.delta) * s.theta_y, (1 + model.eps) * s.phi_z) for s in settings]
    else:
        raise ValueError(f"unsupported model {type(model).__name__}")
    return np.array([rotation_projector(t, p) for t, p in angles])


# ---------------------------------------------------------------------------
# waveplate angle solvers


def _wrap_angle(a: float) -> float:
    """Map to [-pi/2, pi/2)."""
    return float((a + HALF_PI) % np.pi - HALF_PI)


def _prep_overlap(target: np.ndarray, x: float, y: float, dev) -> float:
    ket = preparation_unitary(WaveplateSetting(x, y, "preparation"), dev) @ KET0
    return float(abs(np.vdot(target, ket)) ** 2)


def _proj_overlap(target: np.ndarray, x: float, y: float, dev) -> float:
    u = projection_unitary(WaveplateSetting(x, y, "projection"), dev)
    return float(abs(np.vdot(KET0, u @ target)) ** 2)


def ideal_prep_angles(theta: float, phi: float) -> tuple[float, float]:
    """HWP/QWP angles (x, y) preparing the Bloch point (theta, phi) with ideal plates.

    Closed form ``y = -asin(sin t sin p) / 2``, ``x = atan(tan t cos p) / 4 + y / 2 + c(t)``
    with ``c(t) = pi/4`` on the southern hemisphere.  The arctangent is evaluated as
    ``atan2`` folded back to the principal branch, which also covers the equatorial
    0 * inf case; the branch is then checked against the prepared state.
    """
    if not (np.isfinite(theta) and np.isfinite(phi)):
        raise ValueError("angles must be finite")
    if not -1e-12 <= theta <= np.pi + 1e-12:
        raise ValueError(f"colatitude {theta} outside [0, pi]")
    st, ct = np.sin(theta), np.cos(theta)
    y = -0.5 * np.arcsin(np.clip(st * np.sin(phi), -1.0, 1.0))
    num, den = st * np.cos(phi), ct
    num = 0.0 if abs(num) < 1e-12 else num
    den = 0.0 if abs(den) < 1e-12 else den
    a = np.arctan2(num, den)
    if a > HALF_PI:
        a -= np.pi
    elif a < -HALF_PI:
        a += np.pi
    c = np.pi / 4 if theta > HALF_PI else 0.0
    target = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    best = None
    for shift in (0.0, np.pi, -np.pi):
        x = 0.25 * (a + shift) + 0.5 * y + c
        ov = _prep_overlap(target, x, y, (0.0, 0.0))
        if best is None or ov > best[0] + 1e-15:
            best = (ov, x)
        if ov >= 1 - 1e-12:
            break
    return float(best[1]), float(y)


def solve_waveplate_angles(target: PureState, role: str = "preparation",
                           deviation=(0.0, 0.0), tol: float = 1e-8) -> tuple[float, float]:
    """Waveplate angles (HWP x, QWP y) maximizing overlap with ``target``.

    Nelder-Mead on the 2-D overlap, restarted from a fixed grid of seeds around the
    ideal-plate solution.  Returned angles are wrapped to [-pi/2, pi/2).

    Raises
    ------
    SolverError
        If the best overlap stays below ``1 - 1e-6``.
    """
    if role not in ("preparation", "projection"):
        raise ValueError(f"unknown role {role!r}")
    ket = target.ket if isinstance(target, PureState) else PureState.from_ket(target).ket
    ref = PureState.from_ket(ket if role == "preparation" else np.conjugate(ket))
    x0, y0 = ideal_prep_angles(ref.theta, ref.phi)
    overlap = _prep_overlap if role == "preparation" else _proj_overlap

    def loss(v):
        return 1.0 - overlap(ket, v[0], v[1], deviation)

    offsets = [(0.0, 0.0)] + [(a, b) for a in (0.0, np.pi / 4, HALF_PI, 3 * np.pi / 4)
                              for b in (0.0, HALF_PI)][1:]
    best_val, best_x = np.inf, (x0, y0)
    for dx, dy in offsets:
        res = minimize(loss, [x0 + dx, y0 + dy], method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-16, "maxiter": 4000})
        if res.fun < best_val:
            best_val, best_x = float(res.fun), (float(res.x[0]), float(res.x[1]))
        if best_val <= tol * 1e-3:
            break
    angles = (_wrap_angle(best_x[0]), _wrap_angle(best_x[1]))
    best_ov = 1.0 - best_val
    if best_ov < 1 - 1e-6:
        raise SolverError(f"waveplates reach overlap {best_ov:.8f} only", best_ov, angles)
    return angles


# ---------------------------------------------------------------------------
# chip drives


@dataclass(frozen=True)
class DriveRange:
    low: float = -15.0
    high: float = 15.0


def _solve_quadratic_phase(a0: float, a1: float, a2: float, target: float,
                           vrange: DriveRange) -> float:
    """Drive of smallest magnitude with ``a0 + a1 V + a2 V^2 = target (mod 2 pi)`` inside ``vrange``."""
    if abs(a1) < 1e-15 and abs(a2) < 1e-15:
        raise ValueError("phase polynomial is constant")
    # the phase excursion over the range bounds the number of whole turns to try
    span = abs(a1) * max(abs(vrange.low), abs(vrange.high)) + abs(a2) * max(
        vrange.low ** 2, vrange.high ** 2)
    turns = int(np.ceil(span / (2 * np.pi))) + 1
    best = None
    for k in range(-turns, turns + 1):
        t = target + 2 * np.pi * k
        if abs(a2) < 1e-15:
            cands = [(t - a0) / a1]
        else:
            disc = a1 * a1 - 4 * a2 * (a0 - t)
            if disc < 0:
                continue
            root = np.sqrt(disc)
            cands = [(-a1 + root) / (2 * a2), (-a1 - root) / (2 * a2)]
        for v in cands:
            if vrange.low <= v <= vrange.high and (best is None or abs(v) < abs(best)):
                best = float(v)
    if best is None:
        raise ValueError(f"no drive in [{vrange.low}, {vrange.high}] V reaches phase {target:.4f}")
    return best


def chip_drives_for_states(model: ChipPolynomial, states: Sequence[PureState],
                           vrange: DriveRange = DriveRange()) -> list[ChipDrive]:
    """Voltages that project onto ``states`` according to ``model``.

    ``V1`` sets the Mach-Zehnder phase ``phi1 = pi - theta`` and ``V2`` the input
    phase ``phi2 = pi - phi``; the smallest-magnitude solution is used.
    """
    c1, c2, c3, c4, c5, c6 = model.c
    drives = []
    for s in states:
        ps = s if isinstance(s, PureState) else PureState.from_ket(s)
        v1 = _solve_quadratic_phase(c1, c2, c3, np.pi - ps.theta, vrange)
        v2 = _solve_quadratic_phase(c4, c5, c6, np.pi - ps.phi, vrange)
        drives.append(ChipDrive(v1, v2))
    return drives


def pauli_states() -> list[PureState]:
    """Pauli eigenstates ordered like :func:`pauli_settings`."""
    return [_pauli_state(s) for s in pauli_settings()]


def _pauli_state(s: PauliSetting) -> PureState:
    ket = dagger(pauli_rotation("y", s.theta_y) @ pauli_rotation("z", s.phi_z)) @ KET0
    return PureState(ket, s.theta_y, s.phi_z)
