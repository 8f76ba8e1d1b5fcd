"""Rotating quarter-wave-plate polarimeter with Fourier-analysis reconstruction.

The plate turns through one full revolution in front of an H polarizer and the
detected intensity is sampled at uniformly spaced orientations.  The signal only
contains DC, 2a and 4a harmonics; the Stokes vector is recovered from those five
real coefficients with a linear map built numerically for the *assumed*
retardance.  Nothing forces the result to be physical, so a wrong assumption can
produce a degree of polarization above one.

Stokes ordering: ``S1`` is the H/V balance (``sigma_z``), ``S2`` the diagonal
balance (``sigma_x``) and ``S3`` the circular one (``sigma_y``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .gauge import IllConditionedError
from .qubit import I2, KET0, SX, SY, SZ, dagger, ketbra, waveplate_unitary

HALF_PI = np.pi / 2
DEFAULT_SAMPLES = 360
# largest acceptable condition number of the coefficient -> Stokes map
MAX_CONDITION = 1e8

_STOKES_BASIS = (I2, SZ, SX, SY)


@dataclass(frozen=True)
class StokesVector:
    s0: float
    s1: float
    s2: float
    s3: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.s0, self.s1, self.s2, self.s3])

    @property
    def degree(self) -> float:
        """``D = |(S1, S2, S3)| / S0``; may exceed 1 for reconstructed data."""
        if self.s0 <= 0:
            raise ValueError("degree of polarization needs s0 > 0")
        return float(np.sqrt(self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2) / self.s0)

    def normalized(self) -> "StokesVector":
        return StokesVector(*(self.vector / self.s0))

    def density(self) -> np.ndarray:
        """Intensity-weighted polarization matrix ``(S0 I + S1 Z + S2 X + S3 Y) / 2``."""
        return 0.5 * sum(s * m for s, m in zip(self.vector, _STOKES_BASIS))

    @classmethod
    def from_density(cls, rho: np.ndarray, s0: float = 1.0) -> "StokesVector":
        rho = np.asarray(rho, dtype=complex)
        tr = float(np.real(np.trace(rho)))
        vals = [s0 * float(np.real(np.trace(rho @ m))) / tr for m in (SZ, SX, SY)]
        return cls(float(s0), *vals)


@dataclass(frozen=True)
class PolarimeterTrace:
    angles: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        i = np.asarray(self.intensities, dtype=float)
        if a.shape != i.shape or a.ndim != 1:
            raise ValueError("angles and intensities must be 1-D and of equal length")
        if a.size < 8:
            raise ValueError("a trace needs at least 8 samples")
        if np.any(np.diff(a) <= 0) or a[-1] - a[0] >= 2 * np.pi:
            raise ValueError("angles must increase strictly within one turn")
        if np.any(i < -1e-12):
            raise ValueError("intensities must be non-negative")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "intensities", i)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["angle_rad", "intensity"])
            for a, i in zip(self.angles, self.intensities):
                w.writerow([repr(float(a)), repr(float(i))])


def _uniform_angles(n: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def _detector_effects(angles: np.ndarray, retardance: float) -> np.ndarray:
    """``W(a, G)^dag |0><0| W(a, G)`` for every plate orientation."""
    p0 = ketbra(KET0)
    out = np.empty((len(angles), 2, 2), dtype=complex)
    for k, a in enumerate(angles):
        w = waveplate_unitary(a, retardance)
        out[k] = dagger(w) @ p0 @ w
    return out


def polarimeter_trace(state, true_deviation: float = 0.0,
                      n_samples: int = DEFAULT_SAMPLES, s0: float = 1.0) -> PolarimeterTrace:
    """Detected intensity over one turn of a QWP with retardance ``pi/2 + true_deviation``.

    ``state`` is a density matrix (scaled by ``s0``) or a :class:`StokesVector`.
    """
    if n_samples < 8:
        raise ValueError("n_samples must be >= 8")
    if isinstance(state, StokesVector):
        rho = state.density()
    else:
        rho = s0 * np.asarray(state, dtype=complex)
    angles = _uniform_angles(n_samples)
    eff = _detector_effects(angles, HALF_PI + true_deviation)
    intens = np.real(np.einsum("ij,kji->k", rho, eff))
    return PolarimeterTrace(angles, np.clip(intens, 0.0, None))


def _harmonics(intensities: np.ndarray, start: float = 0.0) -> np.ndarray:
    n = intensities.size
    if n < 10:
        raise ValueError("at least 10 samples are needed to resolve the 4a harmonic")
    f = np.fft.rfft(intensities) / n
    # undo the phase of a trace whose first sample is not at a = 0
    f = f * np.exp(1j * np.arange(f.size) * start)
    return np.array([f[0].real, 2 * f[2].real, -2 * f[2].imag, 2 * f[4].real, -2 * f[4].imag])


def fourier_coefficients(trace: PolarimeterTrace) -> np.ndarray:
    """``(a0, a2, b2, a4, b4)`` of ``I = a0 + a2 cos 2a + b2 sin 2a + a4 cos 4a + b4 sin 4a``."""
    n = trace.angles.size
    if not np.allclose(trace.angles, trace.angles[0] + _uniform_angles(n), atol=1e-9):
        raise ValueError("Fourier analysis needs uniformly spaced angles over one turn")
    return _harmonics(trace.intensities, trace.angles[0])


def coefficient_map(assumed_deviation: float, n_samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """5x4 matrix taking a Stokes vector to the Fourier coefficients of its trace.

    Built by pushing the four Stokes basis vectors through the forward model.
    """
    eff = _detector_effects(_uniform_angles(n_samples), HALF_PI + assumed_deviation)
    cols = [_harmonics(np.real(np.einsum("ij,kji->k", 0.5 * m, eff))) for m in _STOKES_BASIS]
    return np.array(cols).T


def polarimeter_reconstruct(trace: PolarimeterTrace, assumed_deviation: float = 0.0) -> StokesVector:
    """Stokes vector from a trace, assuming retardance ``pi/2 + assumed_deviation``.

    Raises
    ------
    IllConditionedError
        If the assumed plate is (nearly) a full- or half-wave plate, which makes
        the circular component invisible.
    """
    m = coefficient_map(assumed_deviation, trace.angles.size)
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(
            f"retardance {np.degrees(HALF_PI + assumed_deviation):.3f} deg does not "
            "determine all Stokes parameters")
    s, *_ = np.linalg.lstsq(m, fourier_coefficients(trace), rcond=None)
    return StokesVector(*(float(v) for v in s))


def degree_modulation(traces: Sequence[PolarimeterTrace], assumed_deviation: float) -> float:
    """Peak-to-peak degree of polarization ``max D - min D`` over a probe ensemble."""
    d = [polarimeter_reconstruct(t, assumed_deviation).degree for t in traces]
    return float(max(d) - min(d))


def degree_landscape(traces: Sequence[PolarimeterTrace], deviations) -> np.ndarray:
    """``Delta D`` for every assumed deviation in ``deviations`` (radians)."""
    return np.array([degree_modulation(traces, float(d)) for d in np.asarray(deviations)])
