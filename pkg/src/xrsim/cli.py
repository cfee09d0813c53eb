"""Command-line experiment harness.

Subcommands: profile, run, sweep, report, print-config.
Exit codes: 0 success, 1 configuration error, 2 infeasible schedule,
3 I/O error.  The XRSIM_OUT_ROOT environment variable sets the default
output root for run and sweep artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, ExperimentConfig, SCHEMA
from .metrics import compare, dump_summary_json, render_comparison
from .profiling import CalibrationError, profile_platform, save_profile
from .runner import _atomic_write, execute_run, prepare_config, run_sweep
from .sched import SchedulingError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_ini(args.config) if args.config \
        else ExperimentConfig.defaults()
    for item in getattr(args, "set", None) or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        where, raw = item.split("=", 1)
        section, key = where.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {section}.{key}")
        from .config import _parse_value
        cfg.set(section, key, _parse_value(SCHEMA[section][key][0], raw,
                                           f"{section}.{key}"))
    cfg.validate()
    return cfg


def _out_root(args) -> str:
    if getattr(args, "out", None):
        return args.out
    return os.environ.get("XRSIM_OUT_ROOT", "runs")


def cmd_run(args) -> int:
    cfg = prepare_config(_load_config(args))
    out_dir = _out_root(args)
    summary = execute_run(cfg, out_dir=out_dir)
    if summary.get("empty"):
        print(f"run complete: no frames in the measured window "
              f"(artifacts in {out_dir})")
    else:
        print(f"run complete: {summary['frame_count']} frames, "
              f"mean M2D {summary['m2d']['mean'] / 1000:.2f} ms, "
              f"mean C2D {summary['c2d']['mean'] / 1000:.2f} ms, "
              f"{summary['fps']:.1f} FPS (artifacts in {out_dir})")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _load_config(args)
    profile = profile_platform(cfg.cost_model(), cfg.values["mvio"]["e_req_m"],
                               cfg.values["motion"]["rot_ratio"])
    out = args.out or "profile.json"
    save_profile(profile, out)
    print(f"profile written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [v for v in args.values.split(",") if v != ""]
    if args.axis not in ("policy",):
        values = [int(v) for v in values]
    report = run_sweep(cfg, args.axis, values, out_root=_out_root(args))
    print(render_comparison(report), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    named, failed = [], []
    for run_dir in args.run_dirs:
        path = os.path.join(run_dir, "summary.json")
        try:
            with open(path) as fp:
                named.append((run_dir, json.load(fp)))
        except FileNotFoundError:
            failed.append((run_dir, "missing summary.json"))
        except json.JSONDecodeError as exc:
            failed.append((run_dir, f"parse error: {exc}"))
    for run_dir, why in failed:
        print(f"error: {run_dir}: {why}", file=sys.stderr)
    if named:
        report = compare(named, baseline=args.baseline)
        print(render_comparison(report), end="")
        if args.json_out:
            _atomic_write(args.json_out,
                          lambda fp: dump_summary_json(report, fp))
    return EXIT_IO if failed else EXIT_OK


def cmd_print_config(args) -> int:
    cfg = _load_config(args)
    sys.stdout.write(cfg.to_ini_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xrsim",
        description="Discrete-event XR pipeline simulator: scheduling "
                    "policies, runtime adaptation, M2D/C2D metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one configuration key")

    p = sub.add_parser("run", help="execute one simulation")
    common(p)
    p.add_argument("--out", help="output directory (default $XRSIM_OUT_ROOT)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("profile", help="calibrate a platform profile")
    common(p)
    p.add_argument("--out", help="profile JSON path (default profile.json)")
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    common(p)
    p.add_argument("--axis", required=True,
                   help="sr_period | atw_period | policy | "
                        "scene_swaps_per_min | motion_spikes_per_min")
    p.add_argument("--values", required=True,
                   help="comma-separated sweep values")
    p.add_argument("--out", help="sweep output root")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("report", help="compare previously written runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--baseline", help="baseline run directory name")
    p.add_argument("--json-out", help="also write the report as JSON")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("print-config", help="print the effective configuration")
    common(p)
    p.set_defaults(fn=cmd_print_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CalibrationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchedulingError as exc:
        print(f"infeasible schedule: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
