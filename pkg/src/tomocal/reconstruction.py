"""Tomogram simulation and maximum-likelihood state reconstruction.

Each measurement setting j is a two-outcome measurement ``{E_j, I - E_j}``;
a tomogram stores the relative frequency of ``E_j``.  Because every pair sums
to the identity, the likelihood is automatically renormalized even when the
assumed effects ``E_j`` themselves do not add up to a multiple of the identity.

The iteration runs on Bloch vectors.  Writing an effect as ``a I + b.sigma``
and the state as ``(I + r.sigma)/2``, the probabilities are ``a + b.r`` and
the diluted update ``rho -> N[M rho M]`` with ``M = m0 I + m.sigma`` maps

    r -> (2 m0 m + 2 (m.r) m + (m0^2 - |m|^2) r) / (m0^2 + 2 m0 m.r + |m|^2)

which keeps the whole inner loop in real arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .qubit import born_probability, check_density_matrix, density_from_bloch

PROB_FLOOR = 1e-12
MIN_DILUTION = 2.0 ** -20


@dataclass(frozen=True, eq=False)
class Tomogram:
    """Frequencies of the first outcome of each two-outcome setting."""

    f_plus: np.ndarray
    shots: int | None = None

    def __post_init__(self):
        f = np.asarray(self.f_plus, dtype=float).ravel()
        if f.size == 0:
            raise ValueError("empty tomogram")
        if np.any(~np.isfinite(f)) or np.any(f < -1e-12) or np.any(f > 1 + 1e-12):
            raise ValueError("frequencies must lie in [0, 1]")
        f = np.clip(f, 0.0, 1.0)
        f.setflags(write=False)
        object.__setattr__(self, "f_plus", f)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tomogram):
            return NotImplemented
        return self.shots == other.shots and np.array_equal(self.f_plus, other.f_plus)

    __hash__ = None

    @property
    def f_minus(self) -> np.ndarray:
        return 1.0 - self.f_plus

    def __len__(self) -> int:
        return self.f_plus.size

    def to_dict(self) -> dict:
        return {"fPlus": [float(v) for v in self.f_plus], "shots": self.shots}

    @classmethod
    def from_dict(cls, data: dict) -> "Tomogram":
        return cls(np.asarray(data["fPlus"], dtype=float), data.get("shots"))


@dataclass(frozen=True)
class MaxLikOptions:
    max_iterations: int = 10000
    trace_distance_tol: float = 1e-10
    dilution: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.trace_distance_tol > 0:
            raise ValueError("trace_distance_tol must be positive")
        if not 0 < self.dilution <= 1:
            raise ValueError("dilution must lie in (0, 1]")


@dataclass(frozen=True)
class MaxLikResult:
    rho: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float


def effect_bloch_form(effects) -> tuple[np.ndarray, np.ndarray]:
    """Split effects ``E = a I + b.sigma`` into ``a`` (n,) and ``b`` (n, 3)."""
    eff = np.asarray(effects, dtype=complex).reshape(-1, 2, 2)
    a = 0.5 * np.real(eff[:, 0, 0] + eff[:, 1, 1])
    b = np.stack([
        np.real(eff[:, 0, 1]),
        -np.imag(eff[:, 0, 1]),
        0.5 * np.real(eff[:, 0, 0] - eff[:, 1, 1]),
    ], axis=1)
    return a, b


def simulate_tomogram(rho: np.ndarray, effects, shots: int | None = None,
                      rng_seed: int | None = None) -> Tomogram:
    """Born-rule tomogram; binomial sampling when ``shots`` is given."""
    eff = np.asarray(effects, dtype=complex).reshape(-1, 2, 2)
    if eff.shape[0] == 0:
        raise ValueError("no effects given")
    probs = np.array([born_probability(rho, e) for e in eff])
    if shots is None:
        return Tomogram(probs)
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(rng_seed)
    return Tomogram(rng.binomial(shots, probs) / shots, shots)


def simulate_tomograms(states, effects) -> np.ndarray:
    """Exact frequencies for many states at once, shape ``(n_states, n_effects)``.

    ``states`` is a stack of density matrices ``(n, 2, 2)``.
    """
    rhos = np.asarray(states, dtype=complex).reshape(-1, 2, 2)
    eff = np.asarray(effects, dtype=complex).reshape(-1, 2, 2)
    probs = np.real(np.einsum("kab,jba->kj", rhos, eff))
    return np.clip(probs, 0.0, 1.0)


@numba.njit(cache=True)
def _loglik(r0, r1, r2, a, b, f, floor):
    total = 0.0
    for j in range(a.shape[0]):
        p = a[j] + b[j, 0] * r0 + b[j, 1] * r1 + b[j, 2] * r2
        q = 1.0 - p
        if p < floor:
            p = floor
        if q < floor:
            q = floor
        fj = f[j]
        if fj > 0.0:
            total += fj * np.log(p)
        if fj < 1.0:
            total += (1.0 - fj) * np.log(q)
    return total


@numba.njit(cache=True)
def _rrr_step(r0, r1, r2, ll, a, b, f, dilution, floor, min_dilution):
    """Diluted R-rho-R update, halving the dilution until the likelihood does not drop."""
    n_set = a.shape[0]
    # normalized R operator A I + B.sigma; equals I at an interior optimum
    big_a = 0.0
    b0 = 0.0
    b1 = 0.0
    b2 = 0.0
    for j in range(n_set):
        p = a[j] + b[j, 0] * r0 + b[j, 1] * r1 + b[j, 2] * r2
        q = 1.0 - p
        if p < floor:
            p = floor
        if q < floor:
            q = floor
        g = f[j] / p
        h = (1.0 - f[j]) / q
        big_a += g * a[j] + h * (1.0 - a[j])
        c = g - h
        b0 += c * b[j, 0]
        b1 += c * b[j, 1]
        b2 += c * b[j, 2]
    big_a /= n_set
    b0 /= n_set
    b1 /= n_set
    b2 /= n_set
    d = dilution
    while True:
        m0 = 1.0 + d * (big_a - 1.0)
        m1 = d * b0
        m2 = d * b1
        m3 = d * b2
        mr = m1 * r0 + m2 * r1 + m3 * r2
        mm = m1 * m1 + m2 * m2 + m3 * m3
        t = m0 * m0 + 2.0 * m0 * mr + mm
        s = m0 * m0 - mm
        c1 = 2.0 * m0 + 2.0 * mr
        n0 = (c1 * m1 + s * r0) / t
        n1 = (c1 * m2 + s * r1) / t
        n2 = (c1 * m3 + s * r2) / t
        norm = np.sqrt(n0 * n0 + n1 * n1 + n2 * n2)
        if norm > 1.0:
            n0 /= norm
            n1 /= norm
            n2 /= norm
        new_ll = _loglik(n0, n1, n2, a, b, f, floor)
        if new_ll >= ll - 1e-13:
            return n0, n1, n2, new_ll
        d *= 0.5
        if d < min_dilution:
            return r0, r1, r2, ll


@numba.njit(cache=True)
def _newton_step(r0, r1, r2, ll, a, b, f, floor):
    """Newton step on the exact quadratic model, constrained to the Bloch ball.

    The constrained model maximizer solves ``(A + 2 mu I) x = A r + g`` with the
    multiplier ``mu >= 0`` fixed by ``|x| = 1`` whenever the free maximizer lies
    outside the ball.  A backtracking search along the feasible segment keeps
    the likelihood monotone.
    """
    n_set = a.shape[0]
    g = np.zeros(3)
    hess = np.zeros((3, 3))
    for j in range(n_set):
        p = a[j] + b[j, 0] * r0 + b[j, 1] * r1 + b[j, 2] * r2
        q = 1.0 - p
        if p < floor:
            p = floor
        if q < floor:
            q = floor
        w = f[j] / p - (1.0 - f[j]) / q
        h = f[j] / (p * p) + (1.0 - f[j]) / (q * q)
        for u in range(3):
            g[u] += w * b[j, u]
            for v in range(3):
                hess[u, v] += h * b[j, u] * b[j, v]
    for u in range(3):
        hess[u, u] += 1e-12
    r = np.array([r0, r1, r2])
    rhs = hess @ r + g
    lam, vec = np.linalg.eigh(hess)
    c = vec.T @ rhs
    x = vec @ (c / lam)
    if np.sqrt(np.sum(x * x)) > 1.0:
        lo = 0.0
        hi = 1.0
        while np.sqrt(np.sum((c / (lam + hi)) ** 2)) > 1.0:
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if np.sqrt(np.sum((c / (lam + mid)) ** 2)) > 1.0:
                lo = mid
            else:
                hi = mid
        x = vec @ (c / (lam + hi))
        nx = np.sqrt(np.sum(x * x))
        if nx > 1.0:
            x /= nx
    t = 1.0
    for _ in range(40):
        y = r + t * (x - r)
        new_ll = _loglik(y[0], y[1], y[2], a, b, f, floor)
        if new_ll >= ll - 1e-13:
            return y[0], y[1], y[2], new_ll
        t *= 0.5
    return r0, r1, r2, ll


@numba.njit(cache=True)
def _maxlik_kernel(freqs, a, b, max_iter, tol, dilution, floor, min_dilution,
                   out_r, out_iter, out_conv, out_ll, history):
    n_tomo = freqs.shape[0]
    record = history.shape[1] > 1
    for k in range(n_tomo):
        f = freqs[k]
        r0 = 0.0
        r1 = 0.0
        r2 = 0.0
        ll = _loglik(r0, r1, r2, a, b, f, floor)
        if record:
            history[k, 0] = ll
        converged = False
        it = 0
        while it < max_iter:
            it += 1
            n0, n1, n2, new_ll = _rrr_step(r0, r1, r2, ll, a, b, f, dilution, floor, min_dilution)
            q0, q1, q2, q_ll = _newton_step(r0, r1, r2, ll, a, b, f, floor)
            if q_ll > new_ll:
                n0 = q0
                n1 = q1
                n2 = q2
                new_ll = q_ll
            step = 0.5 * np.sqrt((n0 - r0) ** 2 + (n1 - r1) ** 2 + (n2 - r2) ** 2)
            r0 = n0
            r1 = n1
            r2 = n2
            ll = new_ll
            if record:
                history[k, it] = ll
            if step < tol:
                converged = True
                break
        out_r[k, 0] = r0
        out_r[k, 1] = r1
        out_r[k, 2] = r2
        out_iter[k] = it
        out_conv[k] = converged
        out_ll[k] = ll


def maxlik_bloch(freqs, effects, opts: MaxLikOptions = MaxLikOptions(),
                 record_history: bool = False):
    """Batched reconstruction returning Bloch vectors.

    Parameters
    ----------
    freqs : array_like, shape (n_tomograms, n_settings)
        First-outcome frequencies.
    effects : array_like, shape (n_settings, 2, 2)
        Assumed effects.

    Returns
    -------
    bloch : ndarray (n_tomograms, 3)
    converged : ndarray of bool
    iterations : ndarray of int
    loglik : ndarray of float
    history : ndarray or None
        Log-likelihood after every iteration (NaN-padded) when requested.
    """
    f = np.ascontiguousarray(np.clip(np.atleast_2d(np.asarray(freqs, dtype=float)), 0.0, 1.0))
    a, b = effect_bloch_form(effects)
    if f.shape[1] != a.size:
        raise ValueError(f"{f.shape[1]} frequencies per tomogram but {a.size} effects")
    n = f.shape[0]
    out_r = np.zeros((n, 3))
    out_iter = np.zeros(n, dtype=np.int64)
    out_conv = np.zeros(n, dtype=np.bool_)
    out_ll = np.zeros(n)
    history = np.full((n, opts.max_iterations + 1 if record_history else 1), np.nan)
    _maxlik_kernel(f, np.ascontiguousarray(a), np.ascontiguousarray(b), opts.max_iterations,
                   opts.trace_distance_tol, opts.dilution, PROB_FLOOR, MIN_DILUTION,
                   out_r, out_iter, out_conv, out_ll, history)
    return out_r, out_conv, out_iter, out_ll, (history if record_history else None)


def maxlik(tomogram: Tomogram, effects, opts: MaxLikOptions = MaxLikOptions()) -> MaxLikResult:
    """Maximum-likelihood density matrix for one tomogram under the assumed ``effects``."""
    r, conv, it, ll, _ = maxlik_bloch(tomogram.f_plus[None, :], effects, opts)
    return MaxLikResult(density_from_bloch(r[0]), bool(conv[0]), int(it[0]), float(ll[0]))


def maxlik_many(tomograms: Sequence[Tomogram], effects,
                opts: MaxLikOptions = MaxLikOptions()) -> list[MaxLikResult]:
    freqs = np.stack([t.f_plus for t in tomograms])
    r, conv, it, ll, _ = maxlik_bloch(freqs, effects, opts)
    return [MaxLikResult(density_from_bloch(r[k]), bool(conv[k]), int(it[k]), float(ll[k]))
            for k in range(len(tomograms))]


def log_likelihood(rho: np.ndarray, tomogram: Tomogram, effects) -> float:
    """Two-outcome log-likelihood with the same probability floor as :func:`maxlik`."""
    rho = check_density_matrix(rho, tol=1e-8)
    eff = np.asarray(effects, dtype=complex).reshape(-1, 2, 2)
    p = np.real(np.einsum("ab,jba->j", rho, eff))
    p = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    f = tomogram.f_plus
    return float(np.sum(f * np.log(p) + (1 - f) * np.log(1 - p)))

