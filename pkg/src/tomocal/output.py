"""File emission: summary.json, trials.csv, landscape.csv, traces and figures.

JSON floats are written with ``repr`` precision and sorted keys so identical
results give identical bytes; the only volatile field is ``generatedAt``.  CSV
files use ',' separators, '.' decimals, LF line endings and UTF-8.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .calibration import LandscapeGrid
from .config import SCHEMA_VERSION, ExperimentConfig
from .scenarios import ScenarioResult

TIMESTAMP_KEY = "generatedAt"


def _plain(obj):
    """Recursively convert numpy scalars/arrays to JSON types; non-finite -> None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def summary_document(result: ScenarioResult, cfg: ExperimentConfig) -> dict:
    config = cfg.to_dict()
    config.pop("outputDir", None)  # where results go is not part of the result
    return _plain({
        "schemaVersion": SCHEMA_VERSION,
        TIMESTAMP_KEY: datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "scenario": result.scenario,
        "config": config,
        "summary": result.summary,
        "records": result.records,
        "landscapes": {name: g.to_dict() for name, g in result.landscapes.items()},
    })


def dumps_summary(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_summary(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schemaVersion") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schemaVersion {doc.get('schemaVersion')!r}")
    return doc


def without_timestamp(text: str) -> str:
    """Summary text with the timestamp line removed, for byte comparisons."""
    return "".join(line for line in text.splitlines(keepends=True)
                   if f'"{TIMESTAMP_KEY}"' not in line)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value)) if math.isfinite(value) else ""
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_trials_csv(path, records) -> None:
    columns = []
    for rec in records:
        columns += [k for k in rec if k not in columns]
    write_csv(path, columns, ([rec.get(c) for c in columns] for rec in records))


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_csv(path) -> list[dict]:
    """Rows of a CSV written by this module, with numbers and booleans parsed."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_landscape_csv(path, grid: LandscapeGrid) -> None:
    """One row per grid node: the scanned parameters then the cost."""
    values = np.asarray(grid.values)
    rows = ([*(ax[i] for ax, i in zip(grid.axes, idx)), values[idx]]
            for idx in itertools.product(*(range(len(ax)) for ax in grid.axes)))
    write_csv(path, [*grid.names, grid.quantity],
              ([float(v) for v in row] for row in rows))


def write_outputs(result: ScenarioResult, cfg: ExperimentConfig, out_dir,
                  figures: bool = True) -> list[Path]:
    """Write every artefact of ``result`` into ``out_dir``; returns the paths written.

    Raises
    ------
    OSError
        If the directory cannot be created or written; the message names the path.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        path = out / "summary.json"
        path.write_text(dumps_summary(summary_document(result, cfg)), encoding="utf-8", newline="\n")
        written.append(path)
        if result.records:
            path = out / "trials.csv"
            write_trials_csv(path, result.records)
            written.append(path)
        for name, grid in result.landscapes.items():
            path = out / f"{name}.csv"
            write_landscape_csv(path, grid)
            written.append(path)
        if result.traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            for k, trace in enumerate(result.traces):
                path = tdir / f"probe_{k:03d}.csv"
                trace.to_csv(path)
                written.append(path)
        if figures:
            from .figures import write_figures
            written += write_figures(result, out)
        return written
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc.strerror or exc}") from exc
