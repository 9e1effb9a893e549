"""Command-line entry point ``cap``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import MISSING, fields

from . import harness

# flags handled explicitly or not meaningful on the command line
_SKIP = {"experiment"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _field_type(f):
    default = f.default if f.default is not MISSING else None
    if f.name == "episodes":
        return int
    if isinstance(default, bool):
        return lambda s: s.lower() in ("1", "true", "yes", "on")
    if isinstance(default, (int, float, str)):
        return type(default)
    return str


def _add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file of RunConfig keys; explicit flags override it")
    for f in fields(harness.RunConfig):
        if f.name in _SKIP:
            continue
        p.add_argument(_flag(f.name), dest=f.name, type=_field_type(f), default=None,
                       help=f"default: {f.default!r}")


def _run_config(args, experiment: str) -> harness.RunConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise SystemExit("config file must hold a JSON object")
    for f in fields(harness.RunConfig):
        if f.name in _SKIP:
            continue
        value = getattr(args, f.name)
        if value is not None:
            data[f.name] = value
    data["experiment"] = experiment
    return harness.RunConfig.from_dict(data)


def _cmd_run(args, experiment: str) -> int:
    config = _run_config(args, experiment)
    runs = harness.run(config)
    if config.out:
        summary = harness.write_outputs(runs, config, config.out)
    else:
        summary = harness.summarize(runs, config)
    final = summary["final"]
    print(f"{experiment} {config.parsed_mode.label()}: {summary['n_seeds']} seeds x {summary['n_episodes']} episodes")
    for key in ("return", "cost", "true_cost", "cum_violations", "kappa"):
        print(f"  final {key:15s} {final[key]['mean']:.6g} +- {final[key]['std']:.3g}")
    if config.out:
        print(f"  wrote {config.out}")
    return 0


def _lookup(doc: dict, dotted: str):
    node = doc
    for part in dotted.split("."):
        node = node[part]
    return node


def check(summary: dict, thresholds: dict) -> list[tuple[str, float, bool]]:
    """Compare summary entries to ``{"dotted.key": {"min": x, "max": y}}`` bounds."""
    results = []
    for key, bounds in thresholds.items():
        value = float(_lookup(summary, key))
        ok = True
        if "min" in bounds:
            ok &= value >= bounds["min"]
        if "max" in bounds:
            ok &= value <= bounds["max"]
        results.append((key, value, ok))
    return results


def _cmd_check(args) -> int:
    with open(args.against) as fh:
        summary = json.load(fh)
    with open(args.thresholds) as fh:
        thresholds = json.load(fh)
    failed = 0
    for key, value, ok in check(summary, thresholds):
        print(f"{'PASS' if ok else 'FAIL'} {key} = {value:.6g} {thresholds[key]}")
        failed += not ok
    return 1 if failed else 0


def _cmd_selftest(args) -> int:
    from .selftest import run_all

    return 0 if run_all(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cap", description="Conservative and adaptive penalty safe RL workbench")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("gridworld", "pointmass"):
        _add_run_args(sub.add_parser(name, help=f"train on the {name} task"))
    p = sub.add_parser("check", help="compare a summary.json against a thresholds file")
    p.add_argument("--against", required=True, help="summary.json written by a run")
    p.add_argument("--thresholds", required=True, help='JSON {"dotted.key": {"min": ..., "max": ...}}')
    sub.add_parser("selftest", help="run the built-in property checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("gridworld", "pointmass"):
            return _cmd_run(args, args.command)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_selftest(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"cap: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
