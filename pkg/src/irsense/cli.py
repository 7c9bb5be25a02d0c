"""Command-line front end: ``irsense <subcommand> [flags]``.

Every subcommand writes ``<scenario name>_<table>.csv`` files (and SVG plots
with ``--plot``) into ``--out`` and prints the written paths. Failures exit
nonzero with a single JSON object on stderr::

    {"error": "DomainError", "message": "...", "exit_code": 3}
"""

import argparse
import json
import logging
import sys

from . import experiments as ex
from .exceptions import IrsenseError

EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4
EXIT_INTERNAL = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse prints prose and exits; route it through the JSON error path instead
    def error(self, message):
        raise UsageError(message)


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {text}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text}")
    return v


def _step(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"grid step must be in (0, 1] degrees: {text}")
    return v


def _schemes(text):
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in items if s not in ex.SCHEMES]
    if not items or bad:
        raise argparse.ArgumentTypeError(f"schemes must be a comma list from {','.join(ex.SCHEMES)}: {text!r}")
    return items


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--scenario", metavar="FILE", help="JSON scenario file (unknown keys are rejected)")
    common.add_argument("--out", metavar="DIR", help="output directory (default: scenario 'out' or ./out)")
    common.add_argument("--seed", type=_u64, help="unsigned 64-bit master seed")
    common.add_argument("--trials", type=_nonneg_int, help="Monte Carlo trials per point (crb-vs-power)")
    common.add_argument("--plot", action="store_true", help="also write SVG line plots")
    common.add_argument("--grid-step", type=_step, metavar="DEG", help="MUSIC angle grid step in degrees")
    common.add_argument("--scheme", type=_schemes, metavar="LIST", help="comma list of FP,MS,MS-Interp")
    common.add_argument("--jobs", type=int, metavar="N", help="parallel Monte Carlo workers")
    common.add_argument("-v", "--verbose", action="store_true", help="log skipped sweep points")

    p = _Parser(prog="irsense", description="Semi-passive IRS sensing: CRB, placement and MUSIC studies.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("crb-vs-power", parents=[common], help="CRB against transmit power")
    sub.add_parser("crb-vs-k", parents=[common], help="CRB against sensor count, MS vs FP")
    sub.add_parser("beampattern", parents=[common], help="MUSIC spectra for FP, MS and MS-Interp")
    sub.add_parser("placement", parents=[common], help="optimal layouts against the brute-force oracle")
    sub.add_parser("budget", parents=[common], help="element/group budget trade-off")
    return p


def _scenario(args):
    sc = ex.load_scenario(args.scenario) if args.scenario else ex.Scenario()
    changes = {}
    for flag, key in (("out", "out"), ("seed", "seed"), ("trials", "trials"),
                      ("grid_step", "grid_step"), ("scheme", "schemes"), ("jobs", "n_jobs")):
        value = getattr(args, flag)
        if value is not None:
            changes[key] = value
    return sc.with_(**changes) if changes else sc


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    sc = _scenario(args)
    if args.command == "crb-vs-power":
        tables = [ex.run_crb_vs_power(sc)]
    elif args.command == "crb-vs-k":
        tables = [ex.run_crb_vs_sensors(sc)]
    elif args.command == "beampattern":
        tables = list(ex.run_beampattern(sc))
    elif args.command == "placement":
        tables = [ex.run_placement_report(sc)]
    else:
        tables = list(ex.run_budget_report(sc))
    return ex.emit_outputs(tables, sc.out, sc.name, plot=args.plot)


def _fail(exc, code):
    json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    try:
        for path in run(argv):
            print(path)
    except UsageError as exc:
        return _fail(exc, EXIT_USAGE)
    except IrsenseError as exc:
        return _fail(exc, EXIT_DOMAIN)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except Exception as exc:  # noqa: BLE001 - last resort keeps the JSON error contract
        return _fail(exc, EXIT_INTERNAL)
    return 0


if __name__ == "__main__":
    sys.exit(main())
