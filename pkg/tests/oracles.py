"""Independent reference computations for the tests.

Nothing here imports the reconstruction code: the likelihood oracle evaluates
the two-outcome log-likelihood on a regular grid filling the Bloch ball.
"""

from __future__ import annotations

import numpy as np

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def effect_coefficients(effects):
    """``E = a I + b . sigma`` for each effect."""
    eff = np.asarray(effects, dtype=complex).reshape(-1, 2, 2)
    a = 0.5 * np.real(np.trace(eff, axis1=1, axis2=2))
    b = 0.5 * np.real(np.einsum("kab,nba->nk", PAULI, eff))
    return a, b


def ball_grid(step: float) -> np.ndarray:
    ax = np.arange(-1.0, 1.0 + step / 2, step)
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    return pts[np.einsum("ij,ij->i", pts, pts) <= 1.0 + 1e-12]


_GRIDS: dict = {}


def _loglik(points, f, a, b, floor=1e-12):
    p = np.clip(a[None, :] + points @ b.T, floor, 1 - floor)
    return np.log(p) @ f + np.log1p(-p) @ (1 - f)


def brute_force_bloch(freqs, effects, step: float = 0.01, refinements: int = 2,
                      chunk: int = 400_000) -> np.ndarray:
    """Bloch vector maximizing the likelihood by exhaustive grid search.

    A global pass visits every node of a ``step`` grid in the ball.  Each
    refinement then scans a grid ten times finer over +-2 old steps around the
    incumbent; the log-likelihood is concave in the Bloch vector, so the
    maximum stays inside the refined window.
    """
    if step not in _GRIDS:
        _GRIDS[step] = ball_grid(step)
    grid = _GRIDS[step]
    f = np.asarray(freqs, dtype=float)
    a, b = effect_coefficients(effects)
    best, best_val = None, -np.inf
    for start in range(0, len(grid), chunk):
        pts = grid[start:start + chunk]
        ll = _loglik(pts, f, a, b)
        k = int(np.argmax(ll))
        if ll[k] > best_val:
            best_val, best = ll[k], pts[k]
    h = step
    for _ in range(refinements):
        ax = np.arange(-20, 21) * (h / 10)
        x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
        pts = best + np.column_stack([x.ravel(), y.ravel(), z.ravel()])
        pts = pts[np.einsum("ij,ij->i", pts, pts) <= 1.0 + 1e-12]
        ll = _loglik(pts, f, a, b)
        best = pts[int(np.argmax(ll))]
        h /= 10
    return np.array(best)
