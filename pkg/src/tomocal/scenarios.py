"""Simulation pipelines behind every scenario of the experiment runner.

Each scenario turns an :class:`ExperimentConfig` into a :class:`ScenarioResult`:
flat per-trial records (the rows of ``trials.csv``), an aggregate summary, and
optional landscapes, Bloch-sphere maps, curves and polarimeter traces for the
figure and file emitters.  Only the additive study is stochastic; its trials
are independent and seeded from ``(root seed, trial index)``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import (LandscapeGrid, OptimizerConfig, calibrate_global,
                          calibrate_local, fix_chip_gauge, landscape, reconstruction_purities,
                          reversed_calibration)
from .config import ExperimentConfig, to_external
from .gauge import apply_gauge, gauge_unitary
from .models import (PAULI_TABLE_KETS, AdditiveAngles, ChipPolynomial, SolverError,
                     WaveplateSetting, chip_drives_for_states, effects_from_model, model_from_params,
                     pauli_states, pauli_waveplate_settings, preparation_unitary, projection_unitary,
                     solve_waveplate_angles, waveplate_effect)
from .polarimetry import degree_landscape, polarimeter_reconstruct, polarimeter_trace
from .probes import ProbeSet, closest_probe, parse_probe_spec
from .qubit import KET0, PureState, density_from_bloch, fidelity_pure, ketbra, waveplate_unitary
from .reconstruction import MaxLikOptions, maxlik_bloch, simulate_tomograms

log = logging.getLogger(__name__)

QUANTILES = (0.158, 0.5, 0.842)
FAILURE_FRACTION = 0.10


@dataclass
class ScenarioResult:
    scenario: str
    records: list
    summary: dict
    landscapes: dict = field(default_factory=dict)   # name -> LandscapeGrid (external units)
    maps: dict = field(default_factory=dict)         # name -> (n, 3) theta, phi, value
    curves: dict = field(default_factory=dict)       # name -> (x, y, xlabel, ylabel)
    traces: list = field(default_factory=list)       # PolarimeterTrace per probe

    @property
    def failed(self) -> int:
        return sum(1 for r in self.records if r.get("status") == "failed")

    @property
    def failure_exceeded(self) -> bool:
        return bool(self.records) and self.failed > FAILURE_FRACTION * len(self.records)


# ---------------------------------------------------------------------------
# helpers


def trial_seed(root: int, index: int) -> int:
    """Per-trial seed derived from the root seed and the trial index only."""
    return int(np.random.SeedSequence([int(root), int(index)]).generate_state(1)[0])


def nearest_rank(values, q: float) -> float:
    """Nearest-rank quantile: the ``ceil(q n)``-th smallest value (1-based)."""
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    rank = max(1, math.ceil(q * vals.size - 1e-12))
    return float(vals[rank - 1])


def quantile_summary(values) -> dict:
    vals = [v for v in values if v is not None and np.isfinite(v)]
    if not vals:
        return {"q158": None, "median": None, "q842": None}
    lo, med, hi = (nearest_rank(vals, q) for q in QUANTILES)
    return {"q158": lo, "median": med, "q842": hi}


def _maxlik_opts(cfg: ExperimentConfig) -> MaxLikOptions:
    return MaxLikOptions(max_iterations=cfg.maxlik_max_iterations, trace_distance_tol=cfg.maxlik_tol)


def _sample(freqs: np.ndarray, shots: int | None, rng: np.random.Generator) -> np.ndarray:
    if shots is None:
        return freqs
    return rng.binomial(shots, np.clip(freqs, 0.0, 1.0)) / shots


def _optimizer(cfg: ExperimentConfig, seed: int) -> OptimizerConfig:
    lower, upper = cfg.bounds_internal()
    opt = cfg.optimizer
    polish = opt.polish if opt.polish is not None else cfg.model == "chip"
    return OptimizerConfig(tuple(lower), tuple(upper), lh_samples=opt.lh_samples,
                           max_evaluations=opt.max_evaluations, poll_directions=opt.poll_directions,
                           seed=seed % 2 ** 31, local_starts=opt.local_starts,
                           mesh_initial=opt.mesh_initial, mesh_min=opt.mesh_min, polish=polish)


def _gauge_indices(cfg: ExperimentConfig, probes: ProbeSet) -> tuple[int, int]:
    (t1, p1), (t2, p2) = cfg.gauge_references_deg
    return (closest_probe(probes, math.radians(t1), math.radians(p1)),
            closest_probe(probes, math.radians(t2), math.radians(p2)))


def _named(prefix: str, names, values) -> dict:
    return {f"{prefix}_{n}": float(v) for n, v in zip(names, values)}


def ensemble_stats(states, freqs, effects, opts: MaxLikOptions, gauge=None) -> tuple[dict, np.ndarray]:
    """Fidelity and purity statistics of reconstructed ``states``.

    Returns the summary dict and the per-state purities (for maps).
    """
    r, conv, _, _, _ = maxlik_bloch(freqs, effects, opts)
    rhos = np.array([density_from_bloch(v) for v in r])
    if gauge is not None:
        rhos = apply_gauge(gauge, rhos)
    fid = np.array([fidelity_pure(s, rho) for s, rho in zip(states, rhos)])
    pur = 0.5 * (1.0 + np.sum(r * r, axis=1))
    stats = {"minFidelity": float(fid.min()), "meanFidelity": float(fid.mean()),
             "minPurity": float(pur.min()), "meanPurity": float(pur.mean()),
             "converged": bool(np.all(conv))}
    return stats, pur


def _map(probes: ProbeSet, values) -> np.ndarray:
    return np.column_stack([probes.angles, np.asarray(values, dtype=float)])


# ---------------------------------------------------------------------------
# additive study


def additive_trial(cfg: ExperimentConfig, index: int) -> tuple[dict, dict]:
    """One trial: draw truth, calibrate, gauge-fix, score the test ensemble.

    Returns the flat record and the per-probe test purities (before, after).
    """
    seed = trial_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    names = AdditiveAngles.param_names
    base = {"trialIndex": index, "trialSeed": seed}
    try:
        if cfg.truth_params is not None:
            truth = cfg.truth_internal()
        else:
            truth = rng.normal(0.0, math.radians(cfg.truth_sigma_deg), AdditiveAngles.n_params)
        opts = _maxlik_opts(cfg)
        probes = parse_probe_spec(cfg.probe)
        tests = parse_probe_spec(cfg.test_probe)
        eff_true = effects_from_model(AdditiveAngles.from_params(truth))
        freqs = _sample(simulate_tomograms(probes.projectors(), eff_true), cfg.shots, rng)
        test_freqs = _sample(simulate_tomograms(tests.projectors(), eff_true), cfg.shots, rng)

        report = calibrate_global(freqs, "additive", _optimizer(cfg, seed), opts=opts)
        eff_nominal = effects_from_model(AdditiveAngles.zero())
        eff_cal = effects_from_model(report.optimal)

        ga, gb = _gauge_indices(cfg, probes)
        r, _, _, _, _ = maxlik_bloch(freqs[[ga, gb]], eff_cal, opts)
        w = gauge_unitary([density_from_bloch(v) for v in r], [probes.states[ga], probes.states[gb]])

        before, pur_before = ensemble_stats(tests.states, test_freqs, eff_nominal, opts)
        raw, _ = ensemble_stats(tests.states, test_freqs, eff_cal, opts)
        after, pur_after = ensemble_stats(tests.states, test_freqs, eff_cal, opts, gauge=w)
        record = {
            **base, "status": "ok", "error": "",
            "dpBefore": report.cost_before, "dpAfter": report.cost_after,
            "evaluations": report.evaluations, "converged": report.converged,
            "maxlikFailures": report.maxlik_failures,
            **_named("truth", names, np.degrees(truth)),
            **_named("recovered", names, np.degrees(report.optimal.params)),
            **{f"{k}Before": before[k] for k in ("minFidelity", "meanFidelity", "minPurity", "meanPurity")},
            "minFidelityUngauged": raw["minFidelity"],
            **{f"{k}After": after[k] for k in ("minFidelity", "meanFidelity", "minPurity", "meanPurity")},
        }
        return record, {"before": pur_before, "after": pur_after}
    except Exception as exc:  # recorded, the run continues
        log.warning("trial %d failed: %s", index, exc)
        return {**base, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}, {}


def _run_indexed(args):
    cfg, index = args
    return additive_trial(cfg, index)


def run_additive_study(cfg: ExperimentConfig, threads: int = 1) -> ScenarioResult:
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if threads > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_indexed, jobs))
    else:
        results = [_run_indexed(j) for j in jobs]
    records = [r for r, _ in results]
    ok = [r for r in records if r["status"] == "ok"]

    def col(key):
        return [r[key] for r in ok]

    summary = {
        "trials": len(records),
        "failedTrials": len(records) - len(ok),
        "quantileRule": "nearest-rank",
        "dpBefore": quantile_summary(col("dpBefore")),
        "dpAfter": quantile_summary(col("dpAfter")),
        "infidelityBefore": quantile_summary([1 - v for v in col("minFidelityBefore")]),
        "infidelityAfter": quantile_summary([1 - v for v in col("minFidelityAfter")]),
        "meanFidelityBefore": quantile_summary(col("meanFidelityBefore")),
        "meanFidelityAfter": quantile_summary(col("meanFidelityAfter")),
        "improvedTrials": sum(1 for r in ok if r["dpAfter"] <= r["dpBefore"]),
    }
    res = ScenarioResult(cfg.scenario, records, summary)
    first = next(((r, m) for r, m in results if m), None)
    if first is not None:
        tests = parse_probe_spec(cfg.test_probe)
        res.maps["purity_before"] = _map(tests, first[1]["before"])
        res.maps["purity_after"] = _map(tests, first[1]["after"])
    return res


# ---------------------------------------------------------------------------
# two-parameter families and landscapes


def _default_truth(cfg: ExperimentConfig) -> np.ndarray:
    truth = cfg.truth_internal()
    if truth is not None:
        return truth
    if cfg.model == "multiplicative":
        return np.array([0.02, -0.04])
    if cfg.model == "waveplate":
        return np.radians([5.5, -1.5])
    raise ValueError(f"model {cfg.model} needs explicit truthParams")


def _probe_tomograms(cfg: ExperimentConfig, truth, rng=None, drives=None):
    probes = parse_probe_spec(cfg.probe)
    eff = effects_from_model(model_from_params(cfg.model, truth), drives=drives)
    freqs = simulate_tomograms(probes.projectors(), eff)
    if cfg.shots is not None:
        freqs = _sample(freqs, cfg.shots, rng or np.random.default_rng(cfg.seed))
    return probes, freqs


def run_multiplicative(cfg: ExperimentConfig) -> ScenarioResult:
    truth = _default_truth(cfg)
    probes, freqs = _probe_tomograms(cfg, truth)
    report = calibrate_local(freqs, cfg.model, start=cfg.assumed_internal(),
                             bounds=cfg.bounds_internal(), opts=_maxlik_opts(cfg))
    names = model_from_params(cfg.model, truth).param_names
    rec = {"trialIndex": 0, "status": "ok", "error": "",
           **_named("truth", names, to_external(cfg.model, truth)),
           **_named("recovered", names, to_external(cfg.model, report.optimal.params)),
           "dpBefore": report.cost_before, "dpAfter": report.cost_after,
           "evaluations": report.evaluations, "converged": report.converged}
    err = float(np.max(np.abs(report.optimal.params - truth)))
    summary = {"probe": probes.kind, "report": report.to_dict(), "maxParamError": err}
    return ScenarioResult(cfg.scenario, [rec], summary)


def run_landscape(cfg: ExperimentConfig) -> ScenarioResult:
    truth = _default_truth(cfg)
    probes, freqs = _probe_tomograms(cfg, truth)
    axes = cfg.axes_internal()
    grid = landscape(freqs, cfg.model, axes, base=truth, quantity=cfg.landscape_quantity,
                     opts=_maxlik_opts(cfg))
    ext = _external_grid(cfg.model, grid)
    idx = grid.argmin()
    argmin = {n: float(ax[i]) for n, ax, i in zip(ext.names, ext.axes, idx)}
    summary = {"probe": probes.kind, "model": cfg.model, "quantity": grid.quantity,
               "nodes": int(np.size(grid.values)), "minValue": float(np.min(grid.values)),
               "argmin": argmin, "basinSize": grid.basin_size(2.0),
               "truth": [float(v) for v in to_external(cfg.model, truth)]}
    rec = {"trialIndex": 0, "status": "ok", "error": "", "minValue": summary["minValue"],
           "basinSize": summary["basinSize"], **{f"argmin_{k}": v for k, v in argmin.items()}}
    return ScenarioResult(cfg.scenario, [rec], summary, landscapes={"landscape": ext})


def _external_grid(variant: str, grid: LandscapeGrid) -> LandscapeGrid:
    if variant not in ("additive", "waveplate"):
        return grid
    return LandscapeGrid(tuple(f"{n}_deg" for n in grid.names),
                         tuple(np.degrees(a) for a in grid.axes), grid.values, grid.quantity)


# ---------------------------------------------------------------------------
# waveplates


def _solve(target, role: str, dev) -> tuple[tuple[float, float], bool]:
    """Solver angles, falling back to the best reachable ones; flag reachability."""
    try:
        return solve_waveplate_angles(target, role, dev), True
    except SolverError as exc:
        return exc.best_angles, False


def _waveplate_inputs(cfg: ExperimentConfig):
    meas = tuple(_default_truth(cfg))
    prep = tuple(np.radians(cfg.preparation_truth_deg))
    central = (np.eye(2) if cfg.central_qwp_deg is None
               else waveplate_unitary(math.radians(cfg.central_qwp_deg), np.pi / 2))
    return meas, prep, central


def forward_waveplate(cfg: ExperimentConfig, probes: ProbeSet, meas, prep, central, opts):
    """Probe states prepared with ideal-plate settings on the true plates, sent
    through the central plate and measured with the Pauli projection table."""
    settings = [WaveplateSetting(*solve_waveplate_angles(s, "preparation"), "preparation")
                for s in probes.states]
    rhos = np.array([ketbra(central @ preparation_unitary(s, prep) @ KET0) for s in settings])
    freqs = simulate_tomograms(rhos, effects_from_model(model_from_params("waveplate", meas)))
    return calibrate_local(freqs, "waveplate", bounds=cfg.bounds_internal(), opts=opts)


def reversed_tomograms(probes: ProbeSet, meas, prep, central) -> np.ndarray:
    """Role-swapped data: Pauli states prepared by the preparation table, projected
    onto the former probe states.  Row ``k`` belongs to former probe ``k``."""
    proj = [WaveplateSetting(*solve_waveplate_angles(s, "projection"), "projection")
            for s in probes.states]
    preps = pauli_waveplate_settings("preparation")
    kets = [central @ preparation_unitary(p, prep) @ KET0 for p in preps]
    return np.array([[abs(np.vdot(KET0, projection_unitary(m, meas) @ k)) ** 2 for k in kets]
                     for m in proj])


def verification_stats(tests: ProbeSet, true_meas, true_prep, assumed_meas, assumed_prep,
                       opts: MaxLikOptions) -> tuple[dict, np.ndarray]:
    """Test ensemble prepared and measured with settings re-solved for the assumed plates."""
    unreachable = 0
    prep_settings = []
    for s in tests.states:
        angles, ok = _solve(s, "preparation", assumed_prep)
        unreachable += not ok
        prep_settings.append(WaveplateSetting(*angles, "preparation"))
    meas_settings = []
    for ket in PAULI_TABLE_KETS:
        angles, ok = _solve(PureState.from_ket(ket), "projection", assumed_meas)
        unreachable += not ok
        meas_settings.append(WaveplateSetting(*angles, "projection"))
    rhos = np.array([ketbra(preparation_unitary(s, true_prep) @ KET0) for s in prep_settings])
    freqs = simulate_tomograms(rhos, np.array([waveplate_effect(m, true_meas) for m in meas_settings]))
    eff = np.array([waveplate_effect(m, assumed_meas) for m in meas_settings])
    stats, pur = ensemble_stats(tests.states, freqs, eff, opts)
    stats["unreachableTargets"] = unreachable
    return stats, pur


def _wp_record(stage: str, truth, report) -> dict:
    return {"trialIndex": 0, "stage": stage, "status": "ok", "error": "",
            "truth_delta_deg": math.degrees(truth[0]), "truth_eps_deg": math.degrees(truth[1]),
            "recovered_delta_deg": math.degrees(report.optimal.delta),
            "recovered_eps_deg": math.degrees(report.optimal.eps),
            "dpBefore": report.cost_before, "dpAfter": report.cost_after,
            "evaluations": report.evaluations, "converged": report.converged}


def run_waveplate(cfg: ExperimentConfig, include_forward: bool = True) -> ScenarioResult:
    """Forward and reversed retardance calibration plus the re-solved verification."""
    opts = _maxlik_opts(cfg)
    meas, prep, central = _waveplate_inputs(cfg)
    probes = parse_probe_spec(cfg.probe)
    records, summary = [], {"probe": probes.kind}
    rec_meas = np.zeros(2)
    if include_forward:
        fwd = forward_waveplate(cfg, probes, meas, prep, central, opts)
        records.append(_wp_record("forward", meas, fwd))
        rec_meas = fwd.optimal.params
        summary["forward"] = records[-1]
    rev = reversed_calibration(reversed_tomograms(probes, meas, prep, central),
                               settings=pauli_waveplate_settings("preparation"),
                               bounds=cfg.bounds_internal(), opts=opts)
    records.append(_wp_record("reversed", prep, rev))
    summary["reversed"] = records[-1]
    res = ScenarioResult(cfg.scenario, records, summary)
    if include_forward:
        tests = parse_probe_spec(cfg.test_probe)
        before, pur_b = verification_stats(tests, meas, prep, (0.0, 0.0), (0.0, 0.0), opts)
        after, pur_a = verification_stats(tests, meas, prep, tuple(rec_meas),
                                          tuple(rev.optimal.params), opts)
        summary["verification"] = {"before": before, "after": after, "testProbe": tests.kind}
        res.maps["purity_before"] = _map(tests, pur_b)
        res.maps["purity_after"] = _map(tests, pur_a)
    return res


# ---------------------------------------------------------------------------
# polarimeter


def run_polarimeter(cfg: ExperimentConfig) -> ScenarioResult:
    truth = cfg.polarimeter_true_deg
    true_dev = math.radians(truth)
    probes = parse_probe_spec(cfg.probe)
    traces = [polarimeter_trace(rho, true_dev, cfg.polarimeter_samples) for rho in probes.projectors()]
    lo, hi, step = cfg.polarimeter_grid_deg
    grid_deg = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    dd = degree_landscape(traces, np.radians(grid_deg))
    best = float(grid_deg[int(np.argmin(dd))])
    d_before = [polarimeter_reconstruct(t, 0.0).degree for t in traces]
    d_after = [polarimeter_reconstruct(t, math.radians(best)).degree for t in traces]
    records = [{"trialIndex": k, "status": "ok", "error": "",
                "theta_deg": math.degrees(s.theta), "phi_deg": math.degrees(s.phi),
                "degreeBefore": b, "degreeAfter": a}
               for k, (s, b, a) in enumerate(zip(probes.states, d_before, d_after))]
    summary = {"probe": probes.kind, "trueDeviationDeg": truth, "bestDeviationDeg": best,
               "gridStepDeg": step, "deltaDBefore": float(max(d_before) - min(d_before)),
               "deltaDAfter": float(max(d_after) - min(d_after)),
               "maxDegreeBefore": float(max(d_before)),
               "probesAboveOne": int(sum(d > 1.0 for d in d_before))}
    grid = LandscapeGrid(("deviation_deg",), (grid_deg,), dd, "dD")
    res = ScenarioResult(cfg.scenario, records, summary, landscapes={"landscape": grid},
                         traces=traces)
    res.curves["delta_d"] = (grid_deg, dd, "assumed retardance deviation (deg)", "Delta D")
    res.maps["degree_before"] = _map(probes, d_before)
    return res


# ---------------------------------------------------------------------------
# chip


def run_chip(cfg: ExperimentConfig) -> ScenarioResult:
    """Six-coefficient chip calibration from the initial assumption, then the gauge fix of ``c4``."""
    opts = _maxlik_opts(cfg)
    truth = cfg.truth_internal()
    initial = ChipPolynomial.from_params(cfg.assumed_internal())
    drives = chip_drives_for_states(initial, pauli_states())
    probes, freqs = _probe_tomograms(cfg, truth, drives=drives)

    pur0, _ = reconstruction_purities(freqs, effects_from_model(initial, drives=drives), opts)
    report = calibrate_global(freqs, "chip", _optimizer(cfg, cfg.seed), drives=drives, opts=opts,
                              reference=initial)
    ga, gb = _gauge_indices(cfg, probes)
    fixed, w = fix_chip_gauge(report.optimal, freqs[[ga, gb]],
                              [probes.states[ga], probes.states[gb]], drives, opts)
    pur1, _ = reconstruction_purities(freqs, effects_from_model(fixed, drives=drives), opts)
    names = ChipPolynomial.param_names
    err = fixed.params - truth
    rec = {"trialIndex": 0, "status": "ok", "error": "",
           **_named("truth", names, truth), **_named("initial", names, initial.params),
           **_named("recovered", names, fixed.params),
           "dpBefore": report.cost_before, "dpAfter": report.cost_after,
           "pminBefore": float(pur0.min()), "pminAfter": float(pur1.min()),
           "maxCoefficientError": float(np.max(np.abs(err))),
           "evaluations": report.evaluations, "converged": report.converged}
    summary = {"probe": probes.kind, "report": report.to_dict(), "gaugeProbes": [ga, gb],
               "recovered": [float(v) for v in fixed.params],
               "pminBefore": rec["pminBefore"], "pminAfter": rec["pminAfter"],
               "dpBefore": report.cost_before, "dpAfter": report.cost_after,
               "maxCoefficientError": rec["maxCoefficientError"]}

    # one-dimensional section of the minimum purity through the truth along c6
    lo, hi = cfg.bounds_internal()
    c6 = np.linspace(lo[5], hi[5], 41)
    section = landscape(freqs, "chip", {"c6": c6}, base=truth, drives=drives, quantity="pmin",
                        opts=opts)
    summary["c6SectionArgmax"] = float(c6[int(np.argmax(section.values))])
    res = ScenarioResult(cfg.scenario, [rec], summary, landscapes={"landscape": section})
    res.curves["pmin_c6"] = (c6, section.values, "c6", "minimum purity")
    res.maps["purity_before"] = _map(probes, pur0)
    res.maps["purity_after"] = _map(probes, pur1)
    return res


# ---------------------------------------------------------------------------


def run_scenario(cfg: ExperimentConfig, threads: int = 1) -> ScenarioResult:
    if cfg.scenario == "additive_study":
        return run_additive_study(cfg, threads)
    if cfg.scenario == "multiplicative":
        return run_multiplicative(cfg)
    if cfg.scenario == "waveplate":
        return run_waveplate(cfg)
    if cfg.scenario == "reversed_waveplate":
        return run_waveplate(cfg, include_forward=False)
    if cfg.scenario == "polarimeter":
        return run_polarimeter(cfg)
    if cfg.scenario == "chip":
        return run_chip(cfg)
    if cfg.scenario == "landscape":
        return run_landscape(cfg)
    raise ValueError(f"unknown scenario {cfg.scenario!r}")
