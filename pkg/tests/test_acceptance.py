"""Acceptance criteria AC1-AC9, one PASS/FAIL line each (see the terminal summary)."""

import json
import subprocess
import sys

import numpy as np
import pytest

from acceptance_report import report
from oracles import brute_force_bloch
from tomocal.calibration import calibrate_local
from tomocal.config import ExperimentConfig
from tomocal.models import (CHIP_INITIAL, CHIP_TRUTH, AdditiveAngles, Multiplicative,
                            WaveplateRetardance, chip_drives_for_states, effects_from_model,
                            pauli_states)
from tomocal.output import without_timestamp
from tomocal.probes import closest_probe, probe_set
from tomocal.qubit import density_from_bloch, fidelity_pure, random_pure_state, trace_distance
from tomocal.reconstruction import maxlik, maxlik_bloch, simulate_tomograms, Tomogram
from tomocal.scenarios import run_scenario

TRUTH_MULT = np.array([0.02, -0.04])
AC3_AXES = (("delta", -0.15, 0.15, 41), ("eps", -0.15, 0.15, 41))


def _fmt(x):
    return f"{x:.3g}"


# -- AC1 ----------------------------------------------------------------------

def _consistency(model, probes, drives=None):
    eff = effects_from_model(model, drives=drives)
    r, conv, *_ = maxlik_bloch(simulate_tomograms(probes.projectors(), eff), eff)
    pur = 0.5 * (1 + np.sum(r * r, axis=1))
    fid = np.array([fidelity_pure(s, density_from_bloch(v)) for s, v in zip(probes.states, r)])
    return bool(np.all(conv)), float(np.max(np.abs(pur - 1))), float(np.max(np.abs(fid - 1)))


def test_ac1_consistency_zero():
    rng = np.random.default_rng(1)
    fib = probe_set("fibonacci", 30)
    cases = {
        "additive": (AdditiveAngles.from_params(rng.normal(0, np.radians(10), 12)), fib, None),
        "multiplicative": (Multiplicative(*TRUTH_MULT), fib, None),
        "waveplate": (WaveplateRetardance(*np.radians([5.5, -1.5])), fib, None),
        "chip": (CHIP_TRUTH, probe_set("latlon", 22),
                 chip_drives_for_states(CHIP_INITIAL, pauli_states())),
    }
    checks = []
    for name, (model, probes, drives) in cases.items():
        conv, dp, df = _consistency(model, probes, drives)
        checks.append((f"{name} |P-1| {_fmt(dp)}, |F-1| {_fmt(df)} <= 1e-6",
                       conv and dp <= 1e-6 and df <= 1e-6))
    assert report("AC1", checks)


# -- AC2 and AC9: the demo run through the command line ----------------------

def _demo(out, threads):
    cmd = [sys.executable, "-m", "tomocal.cli", "demo-additive", "--seed", "7",
           "--threads", str(threads), "--no-figures", "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True, text=True)
    return (out / "summary.json").read_text(encoding="utf-8")


@pytest.fixture(scope="module")
def demo_single(tmp_path_factory):
    return _demo(tmp_path_factory.mktemp("demo1"), 1)


@pytest.mark.slow
def test_ac2_additive_study(demo_single):
    s = json.loads(demo_single)["summary"]
    before, after = s["dpBefore"]["median"], s["dpAfter"]["median"]
    infid = s["infidelityAfter"]["median"]
    checks = [
        (f"trials {s['trials']}, failed {s['failedTrials']}", s["trials"] == 25),
        (f"median dP before {_fmt(before)} in [3e-2, 2e-1]", 3e-2 <= before <= 2e-1),
        (f"median dP after {_fmt(after)} in [1e-4, 1e-2]", 1e-4 <= after <= 1e-2),
        (f"median infidelity after {_fmt(infid)} <= 3e-3", infid <= 3e-3),
    ]
    assert report("AC2", checks)


@pytest.mark.slow
def test_ac9_determinism(demo_single, tmp_path):
    multi = _demo(tmp_path / "demo8", 8)
    same = without_timestamp(demo_single) == without_timestamp(multi)
    assert report("AC9", [("summary.json 1 thread == 8 threads (timestamp excluded)", same)])


# -- AC3 ----------------------------------------------------------------------

def test_ac3_multiplicative_recovery():
    probes = probe_set("cube8")
    freqs = simulate_tomograms(probes.projectors(), effects_from_model(Multiplicative(*TRUTH_MULT)))
    rep = calibrate_local(freqs, "multiplicative")
    err = float(np.max(np.abs(rep.optimal.params - TRUTH_MULT)))
    res = run_scenario(ExperimentConfig(scenario="landscape", probe="cube8",
                                        truth_params=tuple(TRUTH_MULT), landscape_axes=AC3_AXES))
    grid = res.landscapes["landscape"]
    # the truth falls between grid nodes; its node is the nearest one per axis
    node = tuple(int(np.argmin(np.abs(ax - t))) for ax, t in zip(grid.axes, TRUTH_MULT))
    checks = [
        (f"calibrate_local error {_fmt(err)} <= 1e-3", err <= 1e-3),
        (f"41x41 argmin {tuple(round(float(ax[i]), 4) for ax, i in zip(grid.axes, grid.argmin()))} "
         "is the truth node", tuple(grid.argmin()) == node),
    ]
    assert report("AC3", checks)


# -- AC4 ----------------------------------------------------------------------

def test_ac4_sampling_pathology():
    checks = []
    for probe in ("latlon14", "cube8", "icosahedron12", "fibonacci108"):
        res = run_scenario(ExperimentConfig(scenario="landscape", probe=probe,
                                            truth_params=tuple(TRUTH_MULT), landscape_axes=AC3_AXES))
        basin = res.summary["basinSize"]
        if probe == "latlon14":
            checks.append((f"{probe} valley {basin} nodes >= 5", basin >= 5))
        else:
            checks.append((f"{probe} basin {basin} nodes < 5", basin < 5))
    assert report("AC4", checks)


# -- AC5 ----------------------------------------------------------------------

@pytest.mark.slow
def test_ac5_waveplate():
    res = run_scenario(ExperimentConfig(scenario="waveplate"))
    fwd, rev = res.summary["forward"], res.summary["reversed"]
    fmin = res.summary["verification"]["after"]["minFidelity"]
    checks = [
        (f"forward dP before {_fmt(fwd['dpBefore'])} >= 0.04", fwd["dpBefore"] >= 0.04),
        (f"forward dP after {_fmt(fwd['dpAfter'])} <= 0.01", fwd["dpAfter"] <= 0.01),
        (f"reversed dP before {_fmt(rev['dpBefore'])} at the 0.07 scale [1e-2, 1e-1)",
         1e-2 <= rev["dpBefore"] < 1e-1),
        (f"reversed dP after {_fmt(rev['dpAfter'])} <= 0.01", rev["dpAfter"] <= 0.01),
        (f"re-solved test F_min {fmin:.6f} >= 0.999", fmin >= 0.999),
    ]
    assert report("AC5", checks)


# -- AC6 ----------------------------------------------------------------------

def test_ac6_polarimeter():
    res = run_scenario(ExperimentConfig(scenario="polarimeter"))
    s = res.summary
    probes = probe_set("cube8")
    near_h = closest_probe(probes, 0.0, 0.0)
    d_near_h = res.records[near_h]["degreeBefore"]
    best = s["bestDeviationDeg"]
    checks = [
        (f"D of probe nearest |H> {d_near_h:.4f} > 1", d_near_h > 1),
        (f"dD minimum at {best} deg, truth 5 within 0.25", abs(best - 5.0) <= 0.25),
    ]
    assert report("AC6", checks)


# -- AC7 ----------------------------------------------------------------------

@pytest.mark.slow
def test_ac7_chip():
    res = run_scenario(ExperimentConfig(scenario="chip"))
    s = res.summary
    checks = [
        (f"initial P_min {s['pminBefore']:.4f} = 0.955 +- 0.01", abs(s["pminBefore"] - 0.955) <= 0.01),
        (f"dP after {_fmt(s['dpAfter'])} <= 1e-3", s["dpAfter"] <= 1e-3),
        (f"max coefficient error {_fmt(s['maxCoefficientError'])} <= 1e-2",
         s["maxCoefficientError"] <= 1e-2),
    ]
    assert report("AC7", checks)


# -- AC8 ----------------------------------------------------------------------

def test_ac8_oracle_equivalence():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(50):
        v = rng.normal(size=3)
        v = v / np.linalg.norm(v) * (1.0 if k % 3 == 0 else rng.uniform() ** (1 / 3))
        rho = density_from_bloch(v)
        eff = np.array([random_pure_state(rng).projector() for _ in range(6)])
        f = simulate_tomograms(rho[None], eff)[0]
        ref = density_from_bloch(brute_force_bloch(f, eff))
        worst = max(worst, trace_distance(maxlik(Tomogram(f), eff).rho, ref))
    assert report("AC8", [(f"worst trace distance {_fmt(worst)} <= 2e-3 over 50", worst <= 2e-3)])
