"""Derivative-free optimizers used by the calibration layer.

``mesh_adaptive_search`` is a small mesh-adaptive direct search in the spirit of
OrthoMADS: every poll uses the 2n directions ``+-H e_i`` of a Householder matrix
``H`` built from a fresh pseudo-random unit vector, accepts the first improving
point, doubles the mesh after a success and halves it after a failed poll.
Points outside the box are rejected without evaluation (extreme barrier).
All sizes are expressed in units of the box width per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc


@dataclass
class SearchTrace:
    """Book-keeping shared by all optimizers: evaluation count and best-so-far trace."""

    max_evaluations: int
    evaluations: int = 0
    best_value: float = np.inf
    best_x: np.ndarray | None = None
    trace: list = field(default_factory=list)

    @property
    def exhausted(self) -> bool:
        return self.evaluations >= self.max_evaluations

    def record(self, x: np.ndarray, value: float) -> None:
        self.evaluations += 1
        # strict improvement only: first-found minimum wins ties
        if value < self.best_value:
            self.best_value = float(value)
            self.best_x = np.array(x, dtype=float)
            self.trace.append((self.evaluations, float(value)))


def latin_hypercube(n_samples: int, lower, upper, seed: int) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    sampler = qmc.LatinHypercube(d=lower.size, seed=np.random.default_rng(seed))
    return qmc.scale(sampler.random(n_samples), lower, upper)


def householder_basis(rng: np.random.Generator, n: int) -> np.ndarray:
    """Orthonormal basis ``I - 2 v v^T`` from a random unit vector ``v``."""
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    return np.eye(n) - 2.0 * np.outer(v, v)


def mesh_adaptive_search(fun: Callable[[np.ndarray], float], x0, lower, upper,
                         tracker: SearchTrace, *, f0: float | None = None,
                         mesh_initial: float = 0.1, mesh_min: float = 1e-5,
                         max_evaluations: int | None = None, rotate: bool = True,
                         seed: int = 0) -> tuple[np.ndarray, float, bool]:
    """Minimize ``fun`` inside the box from ``x0``.

    Returns ``(x_best, f_best, mesh_converged)``; ``mesh_converged`` is False when
    the evaluation budget ran out before the poll size fell below ``mesh_min``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    width = upper - lower
    n = lower.size
    rng = np.random.default_rng(seed)
    budget_end = tracker.max_evaluations if max_evaluations is None else min(
        tracker.max_evaluations, tracker.evaluations + max_evaluations)

    u = (np.asarray(x0, dtype=float) - lower) / width
    if f0 is None:
        f0 = fun(lower + u * width)
        tracker.record(lower + u * width, f0)
    fu = float(f0)
    size = mesh_initial
    last_dir = None

    while size >= mesh_min:
        if tracker.evaluations >= budget_end:
            return lower + u * width, fu, False
        basis = householder_basis(rng, n) if rotate else np.eye(n)
        directions = np.vstack([basis.T, -basis.T])
        if last_dir is not None:
            directions = np.vstack([last_dir[None, :], directions])
        success = False
        for d in directions:
            cand = u + size * d
            if np.any(cand < 0.0) or np.any(cand > 1.0):
                continue
            if tracker.evaluations >= budget_end:
                return lower + u * width, fu, False
            x = lower + cand * width
            fc = fun(x)
            tracker.record(x, fc)
            if fc < fu:
                u, fu = cand, fc
                last_dir = d
                success = True
                break
        if success:
            size = min(2.0 * size, 0.5)
        else:
            size *= 0.5
            last_dir = None
    return lower + u * width, fu, True


def global_search(fun: Callable[[np.ndarray], float], lower, upper, *, lh_samples: int,
                  max_evaluations: int, local_starts: int, mesh_initial: float,
                  mesh_min: float, seed: int, rotate: bool = True,
                  polish: Callable[[np.ndarray], tuple[float, float]] | None = None,
                  polish_evaluations: int | None = None, polish_step: float = 0.02,
                  restart_gain: float = 1e-3):
    """Latin-hypercube scan followed by mesh-adaptive search from the best seeds.

    On non-smooth peak-to-valley costs the poll can stall on a kink well before
    the minimum.  ``polish(x) -> (cost, smooth)`` enables a refinement phase:
    Nelder-Mead descends the ``smooth`` companion (at most ``polish_evaluations``
    calls per cycle, default ``2000 n``, simplex edge ``polish_step`` box widths)
    while ``cost`` is recorded, followed by a
    fresh mesh-adaptive poll on ``fun``.  Cycles repeat until one improves the
    best cost by less than the fraction ``restart_gain`` or the budget is spent.

    Returns ``(x_best, f_best, tracker, converged)``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    tracker = SearchTrace(max_evaluations)
    samples = latin_hypercube(lh_samples, lower, upper, seed)
    values = np.empty(len(samples))
    for i, x in enumerate(samples):
        if tracker.exhausted:
            values[i:] = np.inf
            break
        values[i] = fun(x)
        tracker.record(x, values[i])
    order = np.argsort(values, kind="stable")[:max(1, local_starts)]
    converged = True
    for rank, idx in enumerate(order):
        if tracker.exhausted or not np.isfinite(values[idx]):
            converged = False
            break
        remaining = tracker.max_evaluations - tracker.evaluations
        share = remaining // (len(order) - rank)
        _, _, ok = mesh_adaptive_search(
            fun, samples[idx], lower, upper, tracker, f0=values[idx],
            mesh_initial=mesh_initial, mesh_min=mesh_min, max_evaluations=share,
            rotate=rotate, seed=seed + 7919 * (rank + 1))
        converged = converged and ok
    if polish is None:
        return tracker.best_x, tracker.best_value, tracker, converged

    cap = polish_evaluations if polish_evaluations is not None else 2000 * lower.size
    cycle = 0
    while not tracker.exhausted and tracker.best_value > 0.0:
        cycle += 1
        before = tracker.best_value
        sub = SearchTrace(min(cap, tracker.max_evaluations - tracker.evaluations))
        nelder_mead(lambda x: _shared(polish, x, tracker), tracker.best_x, lower, upper, sub,
                    step=polish_step, xatol=1e-12, fatol=0.0)
        if not tracker.exhausted:
            _, _, converged = mesh_adaptive_search(
                fun, tracker.best_x, lower, upper, tracker, f0=tracker.best_value,
                mesh_initial=mesh_initial, mesh_min=mesh_min, rotate=rotate,
                seed=seed + 104729 * cycle)
        else:
            converged = False
        if tracker.best_value > before * (1.0 - restart_gain):
            break
    return tracker.best_x, tracker.best_value, tracker, converged


def _shared(polish, x, tracker: SearchTrace) -> float:
    cost, smooth = polish(x)
    tracker.record(x, cost)
    return smooth


def nelder_mead(fun: Callable[[np.ndarray], float], x0, lower, upper, tracker: SearchTrace,
                *, step: float = 0.1, xatol: float = 1e-9, fatol: float = 1e-13):
    """Bounded Nelder-Mead (scipy) with an initial simplex scaled to the box.

    ``step`` is the simplex edge as a fraction of the box width.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    n = x0.size
    simplex = [x0]
    for i in range(n):
        v = x0.copy()
        h = step * (upper[i] - lower[i])
        v[i] = v[i] + h if v[i] + h <= upper[i] else v[i] - h
        simplex.append(v)

    def wrapped(x):
        val = fun(x)
        tracker.record(x, val)
        return val

    res = minimize(wrapped, x0, method="Nelder-Mead", bounds=list(zip(lower, upper)),
                   options={"initial_simplex": np.array(simplex), "xatol": xatol,
                            "fatol": fatol,
                            "maxfev": max(1, tracker.max_evaluations - tracker.evaluations),
                            "adaptive": n > 2})
    return np.asarray(res.x), float(res.fun), bool(res.success)
