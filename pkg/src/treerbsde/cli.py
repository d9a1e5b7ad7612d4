"""Command line front door: ``treerbsde price|verify|exercise SCENARIO``.

Exit codes: 0 success, 1 verification failures, 2 scenario errors, 3 solver errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import reports
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_FAILED, EXIT_PARSE, EXIT_SOLVER = 0, 1, 2, 3


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_price(args) -> int:
    sc = load_scenario(args.scenario)
    doc, rows = reports.price_report(sc, args.side)
    if args.format == "csv":
        _emit(reports.rows_to_csv(rows), args.out)
        return EXIT_OK
    _emit(reports.dumps(doc), args.out)
    if args.out is not None:
        dump = Path(args.out).with_suffix(".nodes.csv")
        dump.write_text(reports.rows_to_csv(rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = load_scenario(args.scenario)
    doc = reports.verify(sc, args.suite)
    _emit(reports.dumps(doc), args.out)
    return EXIT_OK if doc["passed"] else EXIT_FAILED


def cmd_exercise(args) -> int:
    sc = load_scenario(args.scenario)
    _emit(reports.dumps(reports.exercise_table(sc)), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treerbsde",
        description="Price and verify American contracts on finite event trees.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="acceptable prices, hedges and exercise times")
    p.add_argument("scenario")
    p.add_argument("--side", choices=("issuer", "holder", "both"), default="both")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_price)

    v = sub.add_parser("verify", help="cross-check the solvers against the brute-force oracles")
    v.add_argument("scenario")
    v.add_argument("--suite", choices=("full", "fast"), default="full")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("exercise", help="rational exercise and break-even times")
    e.add_argument("scenario")
    e.add_argument("--out")
    e.set_defaults(func=cmd_exercise)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ArithmeticError, ValueError, RuntimeError, AssertionError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
