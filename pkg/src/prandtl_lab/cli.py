"""Command line entry point: one subcommand per experiment.

Exit status is 0 when every check passes, 1 on any numerical failure
(golden mismatches included) and 2 when the configuration is unusable.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .errors import ConfigInvalid, MissingGolden, PrandtlLabError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prandtl-lab",
                                description="Run the instability experiments.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in experiments.EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", type=Path, help="JSON config file")
        s.add_argument("--out", type=Path, help="output directory (overrides the config)")
        s.add_argument("--seed", type=int, help="random seed (overrides the config)")
        s.add_argument("--check-goldens", action="store_true",
                       help="compare the summary against stored golden values")
        s.add_argument("--golden-dir", type=Path, help="alternative golden store")
        s.add_argument("--bless", action="store_true",
                       help="store this run's values as the new goldens")
    return p


def _config(args) -> experiments.ExperimentConfig:
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except OSError as err:
            raise ConfigInvalid(f"cannot read {args.config}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigInvalid(f"{args.config} is not valid JSON: {err}") from err
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object")
        data.setdefault("experiment", args.experiment)
        if data["experiment"] != args.experiment:
            raise ConfigInvalid(f"config is for {data['experiment']!r}, not {args.experiment!r}")
    else:
        data = {"experiment": args.experiment}
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out_dir"] = str(args.out)
    return experiments.ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
    except ConfigInvalid as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        bundle = experiments.run_experiment(cfg)
    except ConfigInvalid as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except PrandtlLabError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1

    status = 0 if bundle.passed else 1
    if args.check_goldens:
        try:
            goldens = experiments.load_goldens(cfg.experiment, args.golden_dir)
            diff = experiments.compare_goldens(bundle, goldens)
        except MissingGolden as err:
            print(f"golden error: {err}", file=sys.stderr)
            return 2
        bundle.summary["golden_comparison"] = {d.field: {"expected": d.expected,
                                                         "actual": d.actual,
                                                         "rel_diff": d.rel_diff,
                                                         "ok": d.ok} for d in diff.diffs}
        for line in diff.lines():
            print(line)
        if not diff.passed:
            status = 1
    out = experiments.write_bundle(bundle, cfg.out_dir)
    if args.bless:
        target = None if args.golden_dir is None else args.golden_dir / f"{cfg.experiment}.json"
        print(f"goldens written to {experiments.bless_experiment(bundle, target)}")
    print(bundle.report(), end="")
    print(f"outputs in {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
