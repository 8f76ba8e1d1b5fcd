"""Experiment configuration: JSON in, validated dataclass out.

Units at the boundary: angle-valued model parameters (additive, waveplate) and
all other angles are given in degrees; multiplicative factors and chip
coefficients keep their own units.  Everything is converted to radians here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import CHIP_INITIAL, CHIP_TRUTH, MODEL_VARIANTS
from .probes import parse_probe_spec

SCHEMA_VERSION = "1"
SCENARIOS = ("additive_study", "multiplicative", "waveplate", "reversed_waveplate",
             "polarimeter", "chip", "landscape")
STOCHASTIC = ("additive_study",)
ANGLE_VARIANTS = ("additive", "waveplate")

# chip search box: a phase budget of +-0.5 rad per polynomial term at 10 V
CHIP_HALF_WIDTH = (0.5, 0.05, 0.005, 0.5, 0.05, 0.005)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def to_internal(variant: str, values) -> np.ndarray:
    vals = np.asarray(values, dtype=float)
    return np.radians(vals) if variant in ANGLE_VARIANTS else vals


def to_external(variant: str, values) -> np.ndarray:
    vals = np.asarray(values, dtype=float)
    return np.degrees(vals) if variant in ANGLE_VARIANTS else vals


def _check_keys(data: dict, allowed: set, where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


@dataclass(frozen=True)
class OptimizerSection:
    lower: tuple | None = None
    upper: tuple | None = None
    lh_samples: int = 1100
    max_evaluations: int = 100_000
    poll_directions: str = "ortho2n"
    local_starts: int = 4
    mesh_initial: float = 0.1
    mesh_min: float = 1e-5
    polish: bool | None = None  # None: on for the chip scenario only

    KEYS = {"lowerBound": "lower", "upperBound": "upper", "lhSamples": "lh_samples",
            "maxEvaluations": "max_evaluations", "pollDirections": "poll_directions",
            "localStarts": "local_starts", "meshInitial": "mesh_initial",
            "meshMin": "mesh_min", "polish": "polish"}

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerSection":
        _check_keys(data, set(cls.KEYS), "optimizer")
        kwargs = {cls.KEYS[k]: (tuple(v) if k.endswith("Bound") else v) for k, v in data.items()}
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for key, attr in self.KEYS.items():
            val = getattr(self, attr)
            if val is not None:
                out[key] = list(val) if isinstance(val, tuple) else val
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.  Angles are stored in degrees exactly as configured."""

    scenario: str
    seed: int = 0
    probe: str = ""
    test_probe: str = "fibonacci108"
    model: str = ""
    truth_params: tuple | None = None
    truth_sigma_deg: float | None = None
    assumed_params: tuple | None = None
    preparation_truth_deg: tuple = (4.5, -3.6)
    central_qwp_deg: float | None = -12.5
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    trials: int = 1
    shots: int | None = None
    output_dir: str | None = None
    gauge_references_deg: tuple = ((90.0, 0.0), (90.0, 60.0))
    landscape_axes: tuple = ()
    landscape_quantity: str = "dP"
    landscape_offset: float = 0.0
    polarimeter_samples: int = 360
    polarimeter_true_deg: float = 5.0
    polarimeter_grid_deg: tuple = (0.0, 10.0, 0.25)
    maxlik_max_iterations: int = 10_000
    maxlik_tol: float = 1e-10

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        defaults = {"additive_study": ("fibonacci30", "additive"),
                    "multiplicative": ("cube8", "multiplicative"),
                    "waveplate": ("cube8", "waveplate"),
                    "reversed_waveplate": ("cube8", "waveplate"),
                    "polarimeter": ("cube8", "waveplate"),
                    "chip": ("latlon22", "chip"),
                    "landscape": ("cube8", "multiplicative")}
        probe, model = defaults[self.scenario]
        if not self.probe:
            object.__setattr__(self, "probe", probe)
        if not self.model:
            object.__setattr__(self, "model", model)
        if self.model not in MODEL_VARIANTS:
            raise ConfigError(f"unknown model {self.model!r}")
        for spec in (self.probe, self.test_probe):
            try:
                parse_probe_spec(spec)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        n = MODEL_VARIANTS[self.model].n_params
        if self.truth_params is not None and len(self.truth_params) != n:
            raise ConfigError(f"truthParams needs {n} values for model {self.model}")
        if self.assumed_params is not None and len(self.assumed_params) != n:
            raise ConfigError(f"assumedParams needs {n} values for model {self.model}")
        if self.scenario == "additive_study" and self.truth_sigma_deg is None and self.truth_params is None:
            raise ConfigError("additive_study needs truthDistribution or truthParams")
        if self.truth_sigma_deg is not None and not self.truth_sigma_deg >= 0:
            raise ConfigError("truthDistribution sigmaDeg must be >= 0")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if len(self.gauge_references_deg) != 2:
            raise ConfigError("gaugeReferences takes exactly two [theta, phi] pairs")
        if self.scenario == "landscape" and not 1 <= len(self.landscape_axes) <= 2:
            raise ConfigError("landscape needs one or two axes")
        if self.landscape_quantity not in ("dP", "pmin"):
            raise ConfigError("landscape quantity must be 'dP' or 'pmin'")
        lo, hi, step = self.polarimeter_grid_deg
        if not (step > 0 and hi > lo):
            raise ConfigError("polarimeter grid needs start < stop and step > 0")
        if self.optimizer.lower is not None and len(self.optimizer.lower) != n:
            raise ConfigError(f"optimizer bounds need {n} values for model {self.model}")

    # -- derived, internal units -------------------------------------------

    def truth_internal(self) -> np.ndarray | None:
        if self.truth_params is None:
            if self.model == "chip":
                return CHIP_TRUTH.params
            return None
        return to_internal(self.model, self.truth_params)

    def assumed_internal(self) -> np.ndarray:
        if self.assumed_params is not None:
            return to_internal(self.model, self.assumed_params)
        if self.model == "chip":
            return CHIP_INITIAL.params
        return np.zeros(MODEL_VARIANTS[self.model].n_params)

    def bounds_internal(self) -> tuple[np.ndarray, np.ndarray]:
        """Search box in radians; defaults depend on the model family."""
        n = MODEL_VARIANTS[self.model].n_params
        if self.optimizer.lower is not None and self.optimizer.upper is not None:
            return (to_internal(self.model, self.optimizer.lower),
                    to_internal(self.model, self.optimizer.upper))
        if self.model == "chip":
            centre = self.assumed_internal()
            half = np.array(CHIP_HALF_WIDTH)
            return centre - half, centre + half
        half = 0.15 if self.model == "multiplicative" else 0.5
        return -half * np.ones(n), half * np.ones(n)

    def axes_internal(self) -> dict:
        out = {}
        for name, start, stop, num in self.landscape_axes:
            grid = np.linspace(start, stop, int(num))
            if self.landscape_offset:
                grid = grid + self.landscape_offset * (grid[1] - grid[0])
            out[name] = to_internal(self.model, grid)
        return out

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "schemaVersion": SCHEMA_VERSION,
            "scenario": self.scenario,
            "seed": self.seed,
            "probe": self.probe,
            "testProbe": self.test_probe,
            "model": self.model,
            "trials": self.trials,
            "optimizer": self.optimizer.to_dict(),
            "gaugeReferences": [list(p) for p in self.gauge_references_deg],
            "maxlik": {"maxIterations": self.maxlik_max_iterations,
                       "traceDistanceTol": self.maxlik_tol},
        }
        if self.truth_params is not None:
            out["truthParams"] = list(self.truth_params)
        if self.truth_sigma_deg is not None:
            out["truthDistribution"] = {"kind": "normal", "sigmaDeg": self.truth_sigma_deg}
        if self.assumed_params is not None:
            out["assumedParams"] = list(self.assumed_params)
        if self.shots is not None:
            out["shots"] = self.shots
        if self.output_dir is not None:
            out["outputDir"] = self.output_dir
        if self.scenario in ("waveplate", "reversed_waveplate"):
            out["preparationTruthDeg"] = list(self.preparation_truth_deg)
            out["centralQwpDeg"] = self.central_qwp_deg
        if self.scenario == "landscape":
            out["landscape"] = {
                "axes": {name: [start, stop, num] for name, start, stop, num in self.landscape_axes},
                "quantity": self.landscape_quantity,
                "offset": self.landscape_offset,
            }
        if self.scenario == "polarimeter":
            out["polarimeter"] = {"samples": self.polarimeter_samples,
                                  "trueDeviationDeg": self.polarimeter_true_deg,
                                  "gridDeg": list(self.polarimeter_grid_deg)}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        top = {"schemaVersion", "scenario", "seed", "probe", "testProbe", "model", "truthParams",
               "truthDistribution", "assumedParams", "preparationTruthDeg", "centralQwpDeg",
               "optimizer", "trials", "shots", "outputDir", "gaugeReferences", "landscape",
               "polarimeter", "maxlik"}
        _check_keys(data, top, "config")
        if str(data.get("schemaVersion")) != SCHEMA_VERSION:
            raise ConfigError(f"schemaVersion must be {SCHEMA_VERSION!r}")
        if "scenario" not in data:
            raise ConfigError("missing required key 'scenario'")
        if data["scenario"] in STOCHASTIC and "seed" not in data:
            raise ConfigError(f"scenario {data['scenario']} is stochastic and needs a seed")
        kw: dict = {"scenario": data["scenario"]}
        try:
            if "seed" in data:
                kw["seed"] = _int(data["seed"], "seed")
            for key, attr in (("probe", "probe"), ("testProbe", "test_probe"), ("model", "model"),
                              ("outputDir", "output_dir")):
                if key in data:
                    kw[attr] = str(data[key])
            for key, attr in (("truthParams", "truth_params"), ("assumedParams", "assumed_params"),
                              ("preparationTruthDeg", "preparation_truth_deg")):
                if key in data:
                    kw[attr] = tuple(float(v) for v in data[key])
            if "centralQwpDeg" in data:
                kw["central_qwp_deg"] = None if data["centralQwpDeg"] is None else float(data["centralQwpDeg"])
            if "truthDistribution" in data:
                dist = data["truthDistribution"]
                _check_keys(dist, {"kind", "sigmaDeg"}, "truthDistribution")
                if dist.get("kind", "normal") != "normal":
                    raise ConfigError("only normal truth distributions are supported")
                kw["truth_sigma_deg"] = float(dist["sigmaDeg"])
            if "optimizer" in data:
                kw["optimizer"] = OptimizerSection.from_dict(data["optimizer"])
            if "trials" in data:
                kw["trials"] = _int(data["trials"], "trials")
            if "shots" in data and data["shots"] is not None:
                kw["shots"] = _int(data["shots"], "shots")
            if "gaugeReferences" in data:
                kw["gauge_references_deg"] = tuple(tuple(float(v) for v in p) for p in data["gaugeReferences"])
            if "landscape" in data:
                ls = data["landscape"]
                _check_keys(ls, {"axes", "quantity", "offset"}, "landscape")
                axes = []
                for name, spec in ls.get("axes", {}).items():
                    start, stop, num = spec
                    axes.append((str(name), float(start), float(stop), _int(num, f"axis {name}")))
                kw["landscape_axes"] = tuple(axes)
                if "quantity" in ls:
                    kw["landscape_quantity"] = str(ls["quantity"])
                if "offset" in ls:
                    kw["landscape_offset"] = float(ls["offset"])
            if "polarimeter" in data:
                pol = data["polarimeter"]
                _check_keys(pol, {"samples", "gridDeg", "trueDeviationDeg"}, "polarimeter")
                if "trueDeviationDeg" in pol:
                    kw["polarimeter_true_deg"] = float(pol["trueDeviationDeg"])
                if "samples" in pol:
                    kw["polarimeter_samples"] = _int(pol["samples"], "polarimeter samples")
                if "gridDeg" in pol:
                    kw["polarimeter_grid_deg"] = tuple(float(v) for v in pol["gridDeg"])
            if "maxlik" in data:
                ml = data["maxlik"]
                _check_keys(ml, {"maxIterations", "traceDistanceTol"}, "maxlik")
                if "maxIterations" in ml:
                    kw["maxlik_max_iterations"] = _int(ml["maxIterations"], "maxIterations")
                if "traceDistanceTol" in ml:
                    kw["maxlik_tol"] = float(ml["traceDistanceTol"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None


def _int(value, name: str) -> int:
    if isinstance(value, bool) or not float(value).is_integer():
        raise ConfigError(f"{name} must be an integer")
    return int(value)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


def demo_additive_config(seed: int = 7) -> ExperimentConfig:
    """Desk-scale additive study: 25 trials, sigma 10 deg, 30 probes, 108 test states."""
    return ExperimentConfig(
        scenario="additive_study", seed=seed, probe="fibonacci30", test_probe="fibonacci108",
        model="additive", truth_sigma_deg=10.0, trials=25,
        optimizer=OptimizerSection(max_evaluations=30_000))
