"""Purity-modulation cost and the self-calibration drivers.

A set of probe states of equal purity is measured with the *true* device.
Reconstructing every tomogram with the *assumed* effects produces a spread of
purities whenever the assumption is wrong; the spread ``max P - min P`` is the
cost minimized over the parameters of an error model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .gauge import gauge_unitary, z_rotation_angle
from .models import (ChipDrive, ChipPolynomial, ErrorModel, WaveplateSetting, effects_from_model,
                     model_from_params, MODEL_VARIANTS)
from .optimize import SearchTrace, global_search, nelder_mead
from .qubit import density_from_bloch, purity
from .reconstruction import MaxLikOptions, Tomogram, maxlik_bloch

log = logging.getLogger(__name__)

SENTINEL_COST = 1.0
# default half-width of the local search box per family; multiplicative factors
# are dimensionless and only have a single minimum within about +-0.15
LOCAL_HALF_WIDTH = {"additive": 0.5, "multiplicative": 0.15, "waveplate": 0.5}


@dataclass(frozen=True)
class OptimizerConfig:
    """Global search settings; mesh sizes are fractions of each parameter's box width."""

    lower: tuple
    upper: tuple
    lh_samples: int = 1100
    max_evaluations: int = 100_000
    poll_directions: str = "ortho2n"
    seed: int = 0
    local_starts: int = 4
    mesh_initial: float = 0.1
    mesh_min: float = 1e-5
    polish: bool = False

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-D and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise ValueError("bounds must be finite with lower < upper")
        if self.lh_samples < 1:
            raise ValueError("lh_samples must be >= 1")
        if self.poll_directions not in ("ortho2n", "coordinate"):
            raise ValueError(f"unknown poll directions {self.poll_directions!r}")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @classmethod
    def symmetric(cls, n: int, half_width: float = 0.5, **kwargs) -> "OptimizerConfig":
        return cls((-half_width,) * n, (half_width,) * n, **kwargs)


@dataclass
class CalibrationReport:
    optimal: ErrorModel
    cost_before: float
    cost_after: float
    evaluations: int
    cost_trace: list
    converged: bool
    gauge: np.ndarray | None = None
    maxlik_failures: int = 0

    def to_dict(self) -> dict:
        out = {
            "optimalParams": self.optimal.to_dict(),
            "costBefore": self.cost_before,
            "costAfter": self.cost_after,
            "evaluations": self.evaluations,
            "costTrace": [[int(i), float(v)] for i, v in self.cost_trace],
            "converged": self.converged,
            "maxlikFailures": self.maxlik_failures,
        }
        if self.gauge is not None:
            out["gauge"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.gauge]
        return out


@dataclass
class LandscapeGrid:
    names: tuple
    axes: tuple
    values: np.ndarray
    quantity: str = "dP"

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "names": list(self.names),
            "axes": [[float(v) for v in ax] for ax in self.axes],
            "values": np.asarray(self.values).tolist(),
        }

    def argmin(self) -> tuple:
        return np.unravel_index(int(np.argmin(self.values)), np.shape(self.values))

    def basin_size(self, factor: float = 2.0) -> int:
        """Nodes in the connected part of ``{v <= factor * min}`` holding the minimum.

        A sharp minimum gives one node; a rift (a flat valley of near-minimal
        cost) gives many.  Connectivity is face adjacency on the grid.
        """
        vals = np.asarray(self.values, dtype=float)
        low = vals <= factor * vals.min()
        labels, _ = ndimage.label(low)
        return int(np.sum(labels == labels[self.argmin()]))


def purity_modulation(states) -> float:
    """Peak-to-valley purity ``max P - min P`` of an ensemble of density matrices."""
    states = list(states)
    if len(states) < 2:
        raise ValueError("purity modulation needs at least two states")
    p = [purity(s) for s in states]
    return float(max(p) - min(p))


def _freq_matrix(tomograms) -> np.ndarray:
    if isinstance(tomograms, np.ndarray):
        return np.atleast_2d(tomograms)
    return np.stack([t.f_plus if isinstance(t, Tomogram) else np.asarray(t) for t in tomograms])


def reconstruction_purities(freqs, effects, opts: MaxLikOptions = MaxLikOptions()):
    """Purities of all reconstructions and the per-tomogram convergence flags."""
    r, conv, _, _, _ = maxlik_bloch(freqs, effects, opts)
    return 0.5 * (1.0 + np.sum(r * r, axis=1)), conv


@dataclass
class PurityModulationCost:
    """Callable ``params -> dP`` for one model family and a fixed set of tomograms.

    ``quantity`` selects ``"dP"`` (peak-to-valley purity) or ``"pmin"`` (minimum
    purity, used for the chip section plots).
    """

    freqs: np.ndarray
    variant: str
    settings: Sequence | None = None
    drives: Sequence[ChipDrive] | None = None
    opts: MaxLikOptions = field(default_factory=MaxLikOptions)
    quantity: str = "dP"
    failures: int = 0

    def __post_init__(self):
        self.freqs = np.ascontiguousarray(_freq_matrix(self.freqs), dtype=float)
        if self.freqs.shape[0] < 2 and self.quantity == "dP":
            raise ValueError("purity modulation needs at least two tomograms")
        if self.variant not in MODEL_VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}")

    def effects(self, params) -> np.ndarray:
        return effects_from_model(model_from_params(self.variant, params), self.settings, self.drives)

    def __call__(self, params) -> float:
        return self.evaluate_effects(self.effects(params))

    def evaluate_effects(self, effects) -> float:
        return self._evaluate(effects)[0]

    def with_spread(self, params) -> tuple[float, float]:
        """``(cost, standard deviation of the purities)``; both vanish together."""
        return self._evaluate(self.effects(params))

    def _evaluate(self, effects) -> tuple[float, float]:
        pur, conv = reconstruction_purities(self.freqs, effects, self.opts)
        if not np.all(conv):
            self.failures += 1
            return SENTINEL_COST, SENTINEL_COST
        if self.quantity == "pmin":
            return float(pur.min()), float(np.std(pur))
        return float(pur.max() - pur.min()), float(np.std(pur))


def calibration_cost(params: ErrorModel, tomograms, settings=None, drives=None,
                     opts: MaxLikOptions = MaxLikOptions()) -> float:
    """Purity modulation of the probe reconstructions under the assumed ``params``."""
    cost = PurityModulationCost(_freq_matrix(tomograms), params.variant, settings, drives, opts)
    return cost(params.params)


def calibrate_global(tomograms, variant: str, cfg: OptimizerConfig, settings=None,
                     drives=None, opts: MaxLikOptions = MaxLikOptions(),
                     reference: ErrorModel | None = None) -> CalibrationReport:
    """Latin-hypercube scan plus mesh-adaptive direct search over the bound box.

    ``reference`` is the assumption the report's ``cost_before`` refers to
    (defaults to the zero model).
    """
    cost = PurityModulationCost(_freq_matrix(tomograms), variant, settings, drives, opts)
    n = MODEL_VARIANTS[variant].n_params
    if len(cfg.lower) != n:
        raise ValueError(f"{variant} has {n} parameters but bounds have {len(cfg.lower)}")
    reference = reference if reference is not None else MODEL_VARIANTS[variant].zero()
    before = cost(reference.params)
    x, fx, tracker, converged = global_search(
        cost, cfg.lower, cfg.upper, lh_samples=cfg.lh_samples,
        max_evaluations=cfg.max_evaluations, local_starts=cfg.local_starts,
        mesh_initial=cfg.mesh_initial, mesh_min=cfg.mesh_min, seed=cfg.seed,
        rotate=cfg.poll_directions == "ortho2n",
        polish=cost.with_spread if cfg.polish else None)
    if before <= fx:
        x, fx = reference.params, before
    log.debug("global %s: %.3e -> %.3e in %d evaluations", variant, before, fx, tracker.evaluations)
    return CalibrationReport(model_from_params(variant, x), before, fx, tracker.evaluations,
                             tracker.trace, converged, maxlik_failures=cost.failures)


def calibrate_local(tomograms, variant: str, start=None, bounds=None, settings=None,
                    drives=None, opts: MaxLikOptions = MaxLikOptions(),
                    max_evaluations: int = 5000, simplex_step: float = 0.1,
                    xatol: float = 1e-9) -> CalibrationReport:
    """Nelder-Mead descent for the low-dimensional families.

    ``bounds`` is a ``(lower, upper)`` pair; it defaults to ``LOCAL_HALF_WIDTH``
    around zero (0.5 for angles in radians, 0.15 for multiplicative factors).
    """
    n = MODEL_VARIANTS[variant].n_params
    half = LOCAL_HALF_WIDTH.get(variant, 0.5)
    cost = PurityModulationCost(_freq_matrix(tomograms), variant, settings, drives, opts)
    x0 = np.zeros(n) if start is None else np.asarray(start, dtype=float)
    lower, upper = bounds if bounds is not None else (-half * np.ones(n), half * np.ones(n))
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    tracker = SearchTrace(max_evaluations)
    before = cost(x0)
    tracker.record(x0, before)
    x, fx, ok = nelder_mead(cost, x0, lower, upper, tracker, step=simplex_step, xatol=xatol)
    if tracker.best_value < fx:
        x, fx = tracker.best_x, tracker.best_value
    return CalibrationReport(model_from_params(variant, x), before, fx, tracker.evaluations,
                             tracker.trace, ok, maxlik_failures=cost.failures)


def fix_chip_gauge(model: ChipPolynomial, ref_tomograms, ref_states, drives,
                   opts: MaxLikOptions = MaxLikOptions()) -> tuple[ChipPolynomial, np.ndarray]:
    """Pin the input phase offset ``c4`` with two known reference probes.

    A constant shift of ``c4`` turns every effect about z and leaves the purity
    modulation unchanged, so the search cannot fix it.  The reference
    reconstructions give the gauge unitary ``W``; its turn about z is removed from
    ``c4``.  Returns the corrected model and the ``W`` measured before correction.
    """
    freqs = _freq_matrix(ref_tomograms)
    r, conv, _, _, _ = maxlik_bloch(freqs, effects_from_model(model, drives=drives), opts)
    if not np.all(conv):
        raise RuntimeError("reference reconstruction did not converge")
    rhos = [density_from_bloch(v) for v in r]
    w = gauge_unitary(rhos, ref_states)
    c = np.array(model.c)
    c[3] -= z_rotation_angle(w)
    return ChipPolynomial(tuple(c)), w


def reversed_calibration(prep_tomograms, variant: str = "waveplate", cfg: OptimizerConfig | None = None,
                         settings: Sequence[WaveplateSetting] | None = None, start=None, bounds=None,
                         opts: MaxLikOptions = MaxLikOptions()) -> CalibrationReport:
    """Calibrate the *preparation* side from role-swapped data.

    Each tomogram belongs to one former projection state; its entries are the
    frequencies of projecting it onto the prepared states, so the "effects" are
    the prepared states described by preparation-role ``settings``.  Two-parameter
    families use Nelder-Mead, larger ones the global search in ``cfg``.
    """
    if settings is None:
        raise ValueError("reversed calibration needs the preparation settings")
    if any(isinstance(s, WaveplateSetting) and s.role != "preparation" for s in settings):
        raise ValueError("reversed calibration expects preparation-role settings")
    n = MODEL_VARIANTS[variant].n_params
    if n <= 2 and cfg is None:
        return calibrate_local(prep_tomograms, variant, start=start, bounds=bounds,
                               settings=settings, opts=opts)
    if cfg is None:
        cfg = OptimizerConfig.symmetric(n)
    return calibrate_global(prep_tomograms, variant, cfg, settings=settings, opts=opts)


def landscape(tomograms, variant: str, axes: dict, base=None, settings=None, drives=None,
              quantity: str = "dP", opts: MaxLikOptions = MaxLikOptions()) -> LandscapeGrid:
    """Cost on a 1-D or 2-D grid of assumed parameters.

    ``axes`` maps parameter names of ``variant`` to 1-D grids; parameters that are
    not scanned keep their value from ``base`` (default zero).
    """
    cls = MODEL_VARIANTS[variant]
    if not 1 <= len(axes) <= 2:
        raise ValueError("landscape takes one or two axes")
    names = tuple(axes)
    idx = []
    for name in names:
        if name not in cls.param_names:
            raise ValueError(f"{variant} has no parameter {name!r}")
        idx.append(cls.param_names.index(name))
    grids = tuple(np.asarray(axes[name], dtype=float) for name in names)
    cost = PurityModulationCost(_freq_matrix(tomograms), variant, settings, drives, opts, quantity)
    base = np.zeros(cls.n_params) if base is None else np.asarray(
        base.params if isinstance(base, ErrorModel) else base, dtype=float)
    values = np.empty(tuple(len(g) for g in grids))
    for node in np.ndindex(values.shape):
        p = base.copy()
        for k, i in enumerate(idx):
            p[i] = grids[k][node[k]]
        values[node] = cost(p)
    return LandscapeGrid(names, grids, values, quantity)
