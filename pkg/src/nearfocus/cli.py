"""Command-line entry point: ``nearfocus {run,sweep,map,info} SCENARIO``."""

import argparse
import logging
import os
import sys

from .errors import NearFocusError
from .harness import (emit_csv, emit_manifest, emit_report, load_scenario, run_power_map, run_rate_curve,
                      run_sum_rate_sweep)

ARCH_CHOICES = ("fd", "hybrid", "dma", "all")


def _parser():
    parser = argparse.ArgumentParser(prog="nearfocus", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "produce every artifact listed under 'outputs'"),
        ("sweep", "sum-rate versus number of randomly placed users"),
        ("map", "normalized received-power maps of the focal users"),
        ("info", "print region boundaries and element counts"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("scenario", help="YAML scenario file")
        if name == "info":
            continue
        cmd.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        cmd.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        cmd.add_argument("--arch", choices=ARCH_CHOICES, default="all",
                         help="architecture to design (default: every one in the scenario)")
        cmd.add_argument("--far-field-baseline", action="store_true",
                         help="design with plane-wave channels, evaluate on spherical ones")
        if name == "sweep":
            cmd.add_argument("--users", type=int, nargs="+", default=None,
                             help="user counts (default: the scenario's sweep.user_counts)")
    return parser


def _archs(scenario, choice):
    if choice == "all":
        return list(scenario.architectures)
    if choice not in scenario.architectures:
        raise NearFocusError(f"architecture {choice!r} is not configured in the scenario")
    return [choice]


def _info(scenario, stream):
    for key, value in scenario.summary().items():
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        stream.write(f"{key}: {text}\n")


def _execute(args, scenario):
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise NearFocusError("--seed must lie in [0, 2^64)")
        scenario.seed = args.seed
    archs = _archs(scenario, args.arch)
    ff = args.far_field_baseline
    suffix = "_farfield" if ff else ""
    os.makedirs(args.out, exist_ok=True)
    if args.command == "run":
        wanted = scenario.outputs
    elif args.command == "sweep":
        wanted = ("sum_rate_table",)
    else:
        wanted = ("power_map",)

    results, files = {}, []
    if "rate_curve" in wanted:
        results["rate_curve"] = run_rate_curve(scenario, archs, far_field=ff)
    if "power_map" in wanted:
        for arch in archs:
            results[f"power_map_{arch}"] = run_power_map(scenario, arch, far_field=ff)
    if "sum_rate_table" in wanted:
        counts = getattr(args, "users", None)
        results["sum_rate_table"] = run_sum_rate_sweep(scenario, counts, archs, far_field=ff)
    for name, result in results.items():
        filename = f"{name}{suffix}.csv"
        emit_csv(result, os.path.join(args.out, filename))
        files.append(filename)
    report = f"report{suffix}.txt"
    emit_report(results, os.path.join(args.out, report), scenario.summary())
    files.append(report)
    options = {"command": args.command, "arch": args.arch, "far_field_baseline": ff}
    emit_manifest(os.path.join(args.out, f"manifest{suffix}.json"), scenario, scenario.seed, files, options)
    return files


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
        if args.command == "info":
            _info(scenario, sys.stdout)
            return 0
        for name in _execute(args, scenario):
            print(os.path.join(args.out, name))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NearFocusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
