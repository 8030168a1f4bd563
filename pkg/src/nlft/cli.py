"""Command line entry point: ``nlft <experiment> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, parse_key_values, run_experiment

FLAGS = {"d": "d", "K": "K", "N": "N", "seed": "seed", "precision_bits": "precision_bits",
         "epsilon": "epsilon", "lambda_grid": "lambda_grid", "out": "out", "format": "format",
         "samples": "samples"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlft", description="d-adic nonlinear Fourier experiments")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="key=value file; command-line options override it")
    p.add_argument("--d", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--precision-bits", dest="precision_bits", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--lambda-grid", dest="lambda_grid", metavar="a:b:steps")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")
    p.add_argument("--plots", action="store_true", help="also write PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {"experiment": args.experiment}
        overrides.update({k: getattr(args, k) for k in FLAGS if getattr(args, k) is not None})
        overrides.update(parse_key_values("\n".join(args.set)))
        if args.plots:
            overrides["plots"] = True
        if args.config:
            cfg = ExperimentConfig.from_file(args.config, overrides)
        else:
            cfg = ExperimentConfig.from_pairs(overrides)
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"nlft: config error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    paths = report.write()
    if cfg.plots:
        from .plotting import render
        paths += render(report, cfg.out)
    status = "pass" if report.passed else "FAIL"
    print(f"{cfg.experiment}: {status} in {report.seconds:.2f}s")
    for name, ok in report.checks.items():
        print(f"  {'ok ' if ok else 'BAD'} {name}")
    for p in paths:
        print(f"  wrote {p}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
