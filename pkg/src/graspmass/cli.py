"""Command-line front end for the scenario harness.

    graspmass simulate [--config X.yaml] [--out DIR] [--scale 0.8] ...
    graspmass param-sweep / l4-sweep / katana / selftest

Every command prints the run summary (or sweep table) as JSON on stdout;
--out additionally writes the per-topic CSV logs and summary.json that the
plotting tools consume.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .harness import (
    export_logs,
    export_sweep,
    load_scenario,
    run_katana_replication,
    run_l4_sensitivity,
    run_parameter_sensitivity,
    run_scenario,
)
from .model_io import fixture_path


def _load(args) -> "ScenarioConfig":
    cfg = load_scenario(args.config if args.config else fixture_path("baseline.yaml"))
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
        if cfg.sensor is not None:
            overrides["sensor"] = dataclasses.replace(cfg.sensor, rng_seed=args.seed)
    if getattr(args, "duration", None) is not None:
        overrides["duration"] = args.duration
    if getattr(args, "scale", None) is not None:
        overrides["observer_model_scale"] = args.scale
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _floats(text: str):
    return tuple(float(v) for v in text.split(","))


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_simulate(args) -> int:
    result = run_scenario(_load(args))
    if args.out:
        export_logs(result, args.out)
    _emit(result.summary)
    return 0


def cmd_param_sweep(args) -> int:
    rows = run_parameter_sensitivity(_load(args), scales=_floats(args.scales))
    if args.out:
        export_sweep(rows, args.out, x_name="observer_model_scale")
    _emit([{"observer_model_scale": x, **s} for x, s in rows])
    return 0


def cmd_l4_sweep(args) -> int:
    rows = run_l4_sensitivity(_load(args), true_offsets=_floats(args.offsets))
    if args.out:
        export_sweep(rows, args.out, x_name="payload_offset_true")
    _emit([{"payload_offset_true": x, **s} for x, s in rows])
    return 0


def cmd_katana(args) -> int:
    cfg = load_scenario(args.config) if args.config else None
    result = run_katana_replication(cfg)
    if args.out:
        export_logs(result, args.out)
    _emit(result.summary)
    return 0


def cmd_selftest(args) -> int:
    """Abbreviated baseline run plus sanity checks; exits nonzero on failure."""
    cfg = _load(args)
    cfg = dataclasses.replace(cfg, duration=min(cfg.duration, 6.0))
    result = run_scenario(cfg)
    s = result.summary
    problems = []
    if s["gated_fraction"] >= 1.0:
        problems.append("estimate was gated for the entire run")
    if not (0.0 <= s["gated_fraction"] <= 1.0):
        problems.append("gated_fraction out of range")
    if s["dof"] != len(cfg.start_pose or ()) and cfg.start_pose:
        problems.append("dof mismatch against start pose")
    _emit({"summary": s, "problems": problems})
    return 1 if problems else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="graspmass", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sweep=False):
        p.add_argument("--config", help="scenario YAML (default: bundled baseline)")
        p.add_argument("--out", help="directory for CSV logs + summary.json"
                       if not sweep else "CSV file path for the sweep table")
        p.add_argument("--seed", type=int, help="override rng seed")
        p.add_argument("--duration", type=float, help="override run length (s)")

    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    common(p)
    p.add_argument("--scale", type=float, help="observer/controller model scale factor")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("param-sweep", help="rerun with scaled observer models")
    common(p, sweep=True)
    p.add_argument("--scales", default="0.8,1.0,1.2")
    p.set_defaults(func=cmd_param_sweep)

    p = sub.add_parser("l4-sweep", help="rerun with shifted true payload offsets")
    common(p, sweep=True)
    p.add_argument("--offsets", default="0.18,0.21,0.24")
    p.set_defaults(func=cmd_l4_sweep)

    p = sub.add_parser("katana", help="constant-torque run on the bundled 5-DOF arm")
    p.add_argument("--config", help="scenario YAML (default: bundled katana)")
    p.add_argument("--out", help="directory for CSV logs + summary.json")
    p.set_defaults(func=cmd_katana)

    p = sub.add_parser("selftest", help="abbreviated run with sanity checks")
    common(p)
    p.set_defaults(func=cmd_selftest)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
