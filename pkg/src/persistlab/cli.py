"""Command-line front end.

Exit codes: 0 success, 1 a check or criterion failed, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys

from . import acceptance
from . import consistency as cl
from .scenario import DEFAULT_TOLERANCES, ScenarioError, load_scenario, run, scan_table

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _key_value(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key!r} needs a number, got {value!r}") from None


def build_parser():
    parser = _Parser(prog="persistlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run the analyses of a scenario file")
    p_run.add_argument("--scenario", required=True, help="path to a YAML scenario")
    p_run.add_argument("--out", required=True, help="output directory for result tables")

    p_verify = sub.add_parser("verify", help="run the built-in acceptance suite")
    p_verify.add_argument("--tol", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                          help="override a criterion tolerance (repeatable)")
    p_verify.add_argument("--only", nargs="*", metavar="CRITERION",
                          help=f"run only these criteria ({', '.join(acceptance.CRITERIA)})")

    p_scan = sub.add_parser("scan", help="scan candidate combination rules on random scenarios")
    p_scan.add_argument("--seeds", type=int, default=50, help="number of random scenarios")
    p_scan.add_argument("--seed", type=int, default=0, help="base seed")
    p_scan.add_argument("--out", help="directory to write candidate_scan.csv into")
    return parser


def cmd_run(args):
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    tables = run(scenario, args.out)
    failed = False
    for table in tables:
        status = table.metadata.get("pass")
        failed |= status is False
        note = "" if status is None else (" pass" if status else " FAIL")
        print(f"{table.name}: {len(table.rows)} rows{note}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_verify(args):
    if args.only is not None and not args.only:
        print("error: --only needs at least one criterion", file=sys.stderr)
        return EXIT_USAGE
    try:
        overrides = dict(args.tol)
        acceptance.resolve_tolerances(overrides)
        results = acceptance.run_suite(args.only, overrides)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    for result in results:
        print(result.line())
    failures = sum(not r.ok for r in results)
    print(f"{len(results) - failures}/{len(results)} criteria passed")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_scan(args):
    if args.seeds < 1:
        print("error: --seeds must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    results = cl.scan_candidates(cl.default_registry(), cl.random_scenarios(args.seeds, seed=args.seed),
                                 seed=args.seed)
    table = scan_table(results, DEFAULT_TOLERANCES, args.seeds)
    table.metadata = {"analysis": "candidate_scan", "seed": args.seed, **table.metadata}
    if args.out:
        table.write(args.out)
    sys.stdout.write(table.render())
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "verify": cmd_verify, "scan": cmd_scan}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
