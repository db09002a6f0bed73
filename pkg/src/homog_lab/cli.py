"""Command line entry point ``homog-lab``."""

from __future__ import annotations

import argparse
import sys

from . import experiments as E
from .config import default_config, load_config
from .report import emit_report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homog-lab",
                                description="Run homogenization experiments.")
    p.add_argument("experiment", help="experiment name, or 'list'")
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, help="worker processes (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.experiment == "list":
        for name, (_, text) in E.EXPERIMENTS.items():
            print(f"{name:18s} {text}")
        return 0
    try:
        name = E.resolve(args.experiment)
        cfg = load_config(args.config, name) if args.config else default_config(name)
        cfg = cfg.with_overrides(name=name)
        over = {k: v for k, v in (("seed", args.seed), ("workers", args.workers),
                                  ("out", args.out)) if v is not None}
        if over:
            cfg = cfg.with_overrides(**over)
        if cfg.workers < 1:
            raise ValueError("workers must be >= 1")
    except (KeyError, ValueError) as err:
        print(f"homog-lab: {err}", file=sys.stderr)
        return 2
    report = E.run_experiment(cfg)
    emit_report(report, cfg.out)
    for v in report.verdicts:
        print(f"{v.criterion_id:20s} {'PASS' if v.passed else 'FAIL'}  "
              f"measured={v.measured:.6g} threshold={v.threshold:.6g}")
    print(f"wrote {cfg.out}/results.csv and {cfg.out}/verdicts.csv")
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
