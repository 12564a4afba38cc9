"""Command line entry point.

Exit codes: 0 success, 1 bad configuration, 2 runtime failure, 3 selftest failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import yaml

from . import __version__
from .config import BenchmarkScheme, ConfigError, SystemConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _budget(text):
    if text.lower() in ("none", "inf", "0"):
        return None
    try:
        return int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad node budget {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file, or a result CSV to rerun")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--power-dbm", type=_float_list, help="comma-separated transmit powers in dBm")
    common.add_argument("--scheme", help="comma-separated scheme names")
    common.add_argument("--out", help="output directory (default: results, or next to the input for plotdata)")
    common.add_argument("--node-budget", type=_budget, default=argparse.SUPPRESS, help="SESD node budget per solve; 'none' for unlimited")
    common.add_argument("--threads", type=int, default=1, help="worker processes over trials")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="rismse", description="RIS-aided downlink sum-MSE simulator.")
    p.add_argument("--version", action="version", version=f"rismse {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("converge", parents=[common], help="per-iteration convergence traces")
    sub.add_parser("sweep", parents=[common], help="sum rate versus transmit power for every scheme")
    pd = sub.add_parser("plotdata", parents=[common], help="plot-ready series from a result CSV")
    pd.add_argument("results", help="convergence.csv or sweep.csv")
    sub.add_parser("selftest", parents=[common], help="check the solvers against enumeration")
    return p


def resolve_config(args, command: str) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if hasattr(args, "node_budget"):
        changes["sesd_node_budget"] = args.node_budget
    if args.power_dbm:
        if command == "sweep":
            changes["power_sweep_dbm"] = tuple(args.power_dbm)
        else:
            changes["P_dbm"] = args.power_dbm[0]
    if args.scheme:
        changes["schemes"] = tuple(BenchmarkScheme.parse(s) for s in args.scheme.split(",") if s.strip())
    try:
        return cfg.replace(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = resolve_config(args, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(yaml.safe_dump(cfg.to_dict(), sort_keys=True), end="")
        return EXIT_OK

    from . import harness

    try:
        if args.command == "converge":
            path = harness.run_convergence_experiment(cfg, args.out or "results", scheme=cfg.schemes[0], threads=args.threads)
            print(path)
        elif args.command == "sweep":
            path = harness.run_sumrate_sweep(cfg, args.out or "results", threads=args.threads)
            print(path)
        elif args.command == "plotdata":
            for path in harness.emit_plot_data(args.results, args.out):
                print(path)
        elif args.command == "selftest":
            from .selftest import run_selftest

            return EXIT_OK if run_selftest(cfg.seed) else EXIT_SELFTEST
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
