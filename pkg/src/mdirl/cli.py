"""Command-line entry point: ``mdirl <experiment> [--config PATH] [overrides]``."""

import argparse
import os
import sys

from .config import EXPERIMENTS, default_config, load_config
from .errors import ConfigError
from .experiments import format_sweep, run_experiment, schedule_sweep
from .verify import verify_suite

OUTPUT_ENV = "MDIRL_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


def build_parser():
    p = argparse.ArgumentParser(prog="mdirl", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="INI file with a section named after the experiment")
    p.add_argument("--seed", type=int, help="run this single seed instead of the configured list")
    p.add_argument("--out", help=f"output directory (default: config, then ${OUTPUT_ENV}, then ./results)")
    p.add_argument("--steps", type=int, help="override total_steps")
    p.add_argument("--workers", type=int, help="worker processes for seeds and sweep cells")
    return p


def resolve_config(args, environ=None):
    environ = os.environ if environ is None else environ
    cfg = load_config(args.config, args.experiment) if args.config else default_config(args.experiment)
    over = {}
    if args.seed is not None:
        over["seeds"] = (args.seed,)
    if args.steps is not None:
        over["total_steps"] = args.steps
    if args.workers is not None:
        over["workers"] = args.workers
    if args.out is not None:
        over["output_dir"] = args.out
    elif cfg.output_dir == "results" and environ.get(OUTPUT_ENV):
        over["output_dir"] = environ[OUTPUT_ENV]
    if not over:
        return cfg
    try:
        return cfg.replace(**over)
    except TypeError as exc:
        raise ConfigError(f"{args.experiment}: {exc}") from exc


def _report_summary(s, out):
    print(f"{s.experiment} {s.regularizer} schedule={s.schedule}", file=out)
    for seed in s.seeds:
        print(f"  seed {seed}: final={s.finals[seed] * s.scale:.6g} "
              f"baseline={s.baseline_finals[seed] * s.scale:.6g} [{s.statuses[seed]}]", file=out)
    print(f"  mean={s.mean * s.scale:.6g} +- {s.std * s.scale:.6g}  "
          f"baseline={s.baseline_mean * s.scale:.6g} +- {s.baseline_std * s.scale:.6g}  "
          f"delta={s.baseline_delta * s.scale:.6g}", file=out)
    if "summary" in s.files:
        print(f"  summary: {s.files['summary']}", file=out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if cfg.experiment == "verify":
        report = verify_suite(seed=cfg.seeds[0])
        print(report)
        return EXIT_OK if report.passed else EXIT_VERIFY
    try:
        if cfg.experiment == "schedule_sweep":
            cells = schedule_sweep(cfg)
            print(format_sweep(cells))
            print(f"written to {cfg.output_dir}")
        else:
            _report_summary(run_experiment(cfg), sys.stdout)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
