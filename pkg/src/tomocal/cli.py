"""Command-line entry point ``tomocal``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 when more than
10 % of the trials failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, demo_additive_config, load_config
from .output import write_outputs
from .scenarios import run_scenario

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_TRIALS = 0, 1, 2, 3
DEFAULT_OUT = "tomocal_output"
THREADS_ENV = "TOMOCAL_THREADS"

# commands bound to one scenario; ``run`` accepts any
_COMMAND_SCENARIO = {"landscape": "landscape", "polarimeter": "polarimeter", "chip": "chip"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tomocal", description="Self-calibrating qubit tomography experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (overrides outputDir)")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--threads", type=int,
                       help=f"worker processes for trials (fallback: ${THREADS_ENV}, then 1)")
        p.add_argument("--no-figures", action="store_true", help="skip SVG figures")

    for name, text in (("run", "run any scenario config"),
                       ("landscape", "cost landscape on a parameter grid"),
                       ("polarimeter", "rotating-plate polarimeter study"),
                       ("chip", "integrated-chip coefficient calibration")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="experiment config (JSON)")
        common(p)
    common(sub.add_parser("demo-additive", help="built-in 25-trial additive study"))
    return parser


def resolve_threads(arg: int | None) -> int:
    if arg is not None:
        value = arg
    elif os.environ.get(THREADS_ENV):
        try:
            value = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    else:
        value = 1
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def load_for_command(args) -> ExperimentConfig:
    if args.command == "demo-additive":
        cfg = demo_additive_config()
    else:
        cfg = load_config(args.config)
        want = _COMMAND_SCENARIO.get(args.command)
        if want is not None and cfg.scenario != want:
            raise ConfigError(f"'tomocal {args.command}' needs scenario {want!r}, got {cfg.scenario!r}")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_for_command(args)
        threads = resolve_threads(args.threads)
    except ConfigError as exc:
        print(f"tomocal: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or cfg.output_dir or DEFAULT_OUT)
    result = run_scenario(cfg, threads=threads)
    try:
        written = write_outputs(result, cfg, out, figures=not args.no_figures)
    except OSError as exc:
        print(f"tomocal: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{cfg.scenario}: {len(result.records)} record(s), {result.failed} failed; "
          f"{len(written)} file(s) in {out}")
    if result.failure_exceeded:
        print(f"tomocal: {result.failed} of {len(result.records)} trials failed", file=sys.stderr)
        return EXIT_TRIALS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
