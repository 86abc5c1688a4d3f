"""Command-line interface: rate, sweep, optimize, validate.

Exit codes: 0 success, 2 infeasible estimation program, 3 invalid
configuration or arguments.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import driver, validation
from .lp import InfeasibleProgramError
from .passive import EmptyRegionError


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--transmitter", choices=("passive", "oil"), default=None)
    parser.add_argument("--analysis", choices=("baseline", "refined"), default=None)
    parser.add_argument("--distance-km", type=float, action="append", default=None)
    parser.add_argument("--att-db", type=float, action="append", default=None)
    parser.add_argument("--ncut", type=int, default=None)
    parser.add_argument("--quadrature-nodes", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--out", type=str, default=None, help="output file (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakyqkd",
                                     description="Key-rate bounds for modulator-free "
                                                 "decoy-state BB84 with leakage")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("rate", "evaluate a single grid point"),
                       ("sweep", "evaluate the full distance/attenuation grid"),
                       ("optimize", "optimise source parameters per grid point")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
    v = sub.add_parser("validate", help="run the numerical cross-check oracles")
    v.add_argument("--seed", type=int, default=20240)
    v.add_argument("--samples", type=int, default=200_000)
    v.add_argument("--fast", action="store_true", help="reduced sample counts")
    return parser


def _load_config(args) -> driver.ProtocolConfig:
    data = {}
    if args.config:
        with open(args.config) as handle:
            data = json.load(handle)
    config = driver.config_from_dict(data)
    overrides = {}
    if args.transmitter:
        overrides["transmitter"] = args.transmitter
    if args.analysis:
        overrides["analysis"] = args.analysis
    if args.distance_km:
        overrides["distances_km"] = tuple(args.distance_km)
    if args.att_db:
        overrides["att_db"] = tuple(args.att_db)
    if args.ncut is not None:
        overrides["n_cut"] = args.ncut
    if args.quadrature_nodes is not None:
        overrides["quadrature_nodes"] = args.quadrature_nodes
    if args.seed is not None:
        overrides["seed"] = args.seed
    return dataclasses.replace(config, **overrides) if overrides else config


def _emit(reports, args):
    if args.format == "csv":
        text = driver.reports_to_csv(reports)
    else:
        text = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        passed = validation.run_all(seed=args.seed, samples=args.samples, fast=args.fast)
        return 0 if passed else 1
    try:
        config = _load_config(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3
    try:
        if args.command == "rate":
            reports = [driver.key_rate(config, d, a)
                       for d in config.distances_km for a in config.att_db]
        elif args.command == "sweep":
            reports = driver.sweep(config)
        else:
            reports = []
            for d in config.distances_km:
                for a in config.att_db:
                    best, report = driver.optimize_point(config, d, a)
                    report.details["optimized"] = {
                        "mu_max": best.mu_max, "delta_theta_z": best.delta_theta_z,
                        "mu_in": best.mu_in, "mu_i1": best.mu_i1}
                    reports.append(report)
    except InfeasibleProgramError as exc:
        print(f"estimation program infeasible: {exc}", file=sys.stderr)
        return 2
    except EmptyRegionError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 3
    _emit(reports, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
