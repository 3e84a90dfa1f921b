"""Command-line entry point: ``maternapprox <command> [options]``."""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench
from .config import ConfigError, load_config
from .selftest import run_selftest

COMMANDS = ("cov-error", "kriging-bench", "taper-sweep", "demo-predict", "selftest")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI file with run settings")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--threads", type=int, help="worker processes for replicates")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--repeats", type=int, help="timing repeats (median is reported)")
    scale = common.add_mutually_exclusive_group()
    scale.add_argument("--desk", dest="scale", action="store_const", const="desk",
                       help="laptop-sized defaults (default)")
    scale.add_argument("--paper-scale", dest="scale", action="store_const", const="paper",
                       help="full-size defaults")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config key")
    common.set_defaults(scale="desk")

    parser = argparse.ArgumentParser(prog="maternapprox", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "cov-error": "covariance error of each method versus range",
        "kriging-bench": "kriging error and step timings on simulated data",
        "taper-sweep": "taper kriging error and timings versus taper range",
        "demo-predict": "prediction fields from one simulated data set",
        "selftest": "quick oracle checks",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _resolve(args):
    overrides = list(args.overrides)
    for flag, key in (("seed", "run.seed"), ("threads", "run.threads"),
                      ("out", "run.out"), ("repeats", "run.repeats")):
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.command, args.scale, args.config, overrides)


def _write_skipped(out_dir, result):
    bench.write_csv(os.path.join(out_dir, "skipped.csv"), bench.SKIPPED_HEADER, result.skipped)


def _write_manifest(out_dir, cfg):
    def plain(v):
        if isinstance(v, dict):
            return {str(k): plain(x) for k, x in v.items()}
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        return v

    manifest = {"command": cfg.command, "scale": cfg.scale, "config": plain(cfg.values)}
    with open(os.path.join(out_dir, "run_config.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg):
    """Execute a resolved config; returns the process exit code."""
    if cfg.command == "selftest":
        return 1 if run_selftest() else 0
    out_dir = bench.ensure_dir(cfg["run"]["out"])
    _write_manifest(out_dir, cfg)
    if cfg.command == "cov-error":
        result = bench.cmd_cov_error(cfg)
        bench.write_csv(os.path.join(out_dir, "cov_error.csv"), bench.COV_ERROR_HEADER, result.rows)
    elif cfg.command == "kriging-bench":
        result = bench.cmd_kriging_bench(cfg)
        bench.write_csv(os.path.join(out_dir, "kriging_bench.csv"), bench.KRIGING_HEADER, result.rows)
        bench.write_csv(os.path.join(out_dir, "kriging_bench_summary.csv"),
                        bench.SUMMARY_HEADER, result.extra["summary"])
    elif cfg.command == "taper-sweep":
        result = bench.cmd_taper_sweep(cfg)
        bench.write_csv(os.path.join(out_dir, "taper_sweep.csv"), bench.TAPER_HEADER, result.rows)
    elif cfg.command == "demo-predict":
        result = bench.cmd_demo_predict(cfg)
        extra = result.extra
        for name, values in extra["fields"].items():
            bench.write_grid(os.path.join(out_dir, f"demo_{name}.txt"), values,
                             extra["dims"], extra["lower"], extra["upper"])
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigError(f"unknown command {cfg.command}")
    _write_skipped(out_dir, result)
    for row in result.skipped:
        print(f"skipped {row[0]} nu={row[1]} range={row[2]}: {row[3]}", file=sys.stderr)
    return 1 if result.failures else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"maternapprox: config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
