"""Command line interface.

Subcommands: ``check`` (admissibility certificate), ``eta`` (signal lower
bound only), ``simulate`` (single run), ``sweep`` (parameter sweep),
``converge`` (order study). Exit codes: 0 success, 1 validation error,
2 runtime error, 3 blow-up suspected.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import experiments
from .admissibility import certify, compute_eta
from .errors import KslabError, ValidationError
from .sensitivity import SensitivityParams

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_BLOWUP = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kslab",
        description="Desk-scale laboratory for a chemotaxis system with "
        "signal-dependent sensitivity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="emit an admissibility certificate as JSON")
    check.add_argument("--K", type=float, required=True)
    check.add_argument("--k", type=float, default=1.0)
    check.add_argument("--a", type=float, default=0.0)
    check.add_argument("--n", type=int, required=True)
    check.add_argument("--eta", type=float, help="use this signal floor directly")
    check.add_argument("--v0-min", type=float, help="minimum of the initial signal")
    check.add_argument("--mass", type=float, help="initial density mass")
    check.add_argument("--c0", type=float, help="fundamental-solution floor (general mode)")
    check.add_argument("--diam", type=float, help="domain diameter (convex mode)")
    check.add_argument("--out", type=Path, help="write the JSON here instead of stdout")

    eta = sub.add_parser("eta", help="compute the signal lower bound only")
    eta.add_argument("--v0-min", type=float, required=True)
    eta.add_argument("--mass", type=float, required=True)
    eta.add_argument("--c0", type=float)
    eta.add_argument("--diam", type=float)
    eta.add_argument("--n", type=int)
    eta.add_argument("--out", type=Path)

    sim = sub.add_parser("simulate", help="run one experiment config")
    sim.add_argument("config", type=Path)
    sim.add_argument("--out", type=Path, help="output directory override")
    sim.add_argument("--cadence", type=int, help="monitor cadence override (steps)")

    sweep = sub.add_parser("sweep", help="run a parameter sweep spec")
    sweep.add_argument("spec", type=Path)
    sweep.add_argument("--out", type=Path, help="output directory override")
    sweep.add_argument("--threads", type=int, help="parallelism override")

    conv = sub.add_parser("converge", help="order study on a benchmark config")
    conv.add_argument("config", type=Path)
    conv.add_argument("--levels", type=int, default=4)
    conv.add_argument("--out", type=Path, help="write the report here instead of stdout")
    conv.add_argument("--format", choices=("json", "csv"), default="json")

    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        print(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")


def _eta_from_args(args) -> object:
    if args.c0 is not None and args.diam is not None:
        raise ValidationError("pass either --c0 (general mode) or --diam (convex mode)")
    if args.c0 is not None:
        return compute_eta(args.v0_min, args.mass, c0=args.c0)
    if args.diam is not None:
        if args.n is None:
            raise ValidationError("convex mode needs --n")
        return compute_eta(args.v0_min, args.mass, diam=args.diam, n=args.n)
    raise ValidationError("pass --c0 or --diam to compute the signal floor")


def _cmd_check(args) -> int:
    sp = SensitivityParams(K=args.K, k=args.k, a=args.a)
    if args.eta is not None:
        eta = args.eta
    else:
        if args.v0_min is None or args.mass is None:
            raise ValidationError("pass --eta, or --v0-min/--mass with --c0 or --diam")
        eta = _eta_from_args(args)
    cert = certify(sp, args.n, eta)
    _emit(json.dumps(cert.to_json_dict(), indent=2, sort_keys=True), args.out)
    return EXIT_OK


def _cmd_eta(args) -> int:
    est = _eta_from_args(args)
    doc = {
        "eta": est.eta,
        "mode": est.mode,
        "tau_star": est.tau_star,
        "c0": est.c0,
        "diam": est.diam,
        "n": est.n,
    }
    _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = experiments.parse_config(args.config)
    if args.cadence is not None:
        if args.cadence < 1:
            raise ValidationError("--cadence must be >= 1")
        config = dataclasses.replace(config, cadence=args.cadence)
    report = experiments.run_experiment(config, out_dir=args.out)
    out = Path(args.out or config.out_dir or Path("runs") / config.label)
    print(f"[{report.status}] {config.label}: artifacts in {out}")
    if report.status == "completed":
        return EXIT_OK
    if report.status == "blow-up-suspected":
        return EXIT_BLOWUP
    return EXIT_RUNTIME


def _cmd_sweep(args) -> int:
    spec = experiments.parse_sweep(args.spec)
    if args.threads is not None:
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        spec = dataclasses.replace(spec, parallelism=args.threads)
    index = experiments.run_sweep(spec, out_dir=args.out)
    print(f"index written to {index}")
    return EXIT_OK


def _cmd_converge(args) -> int:
    config = experiments.parse_config(args.config)
    report = experiments.convergence_study(config, args.levels)
    if args.format == "csv":
        lines = ["cells,error,order"]
        for i, (c, e) in enumerate(zip(report.cells, report.errors)):
            order = repr(report.orders[i - 1]) if i > 0 else ""
            lines.append(f"{c},{e!r},{order}")
        _emit("\n".join(lines), args.out)
    else:
        doc = {
            "benchmark": report.benchmark,
            "cells": list(report.cells),
            "errors": list(report.errors),
            "orders": list(report.orders),
            "observed_order": report.observed_order,
            "monotone": report.monotone,
        }
        _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    return EXIT_OK


_COMMANDS = {
    "check": _cmd_check,
    "eta": _cmd_eta,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "converge": _cmd_converge,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KslabError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
