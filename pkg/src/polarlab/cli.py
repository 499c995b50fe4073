"""Command line entry point.

    polarlab run <config> [--out DIR] [--tol-scale X]
    polarlab suite [DIR] [--out DIR] [--tol-scale X] [--jobs N]
    polarlab list

Exit status: 0 when every check passes, 1 when a check fails or a solver
breaks down, 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import sys

from . import BACKEND, __version__, lab
from .errors import ConfigError, PolarlabError


def _check_line(sid, chk) -> str:
    op = "<=" if chk.kind == "le" else ">="
    return (f"{'PASS' if chk.passed else 'FAIL'}  {sid}.{chk.name}  "
            f"value={chk.value:.3e} {op} {chk.tolerance:.3e}")


def _positive(text):
    value = float(text)
    if not value > 0 or value == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a finite number > 0, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="lab-out", help="directory for JSON summaries and CSV artifacts")
    common.add_argument("--tol-scale", type=_positive, default=1.0,
                        help="multiply every residual tolerance by this factor")
    common.add_argument("-q", "--quiet", action="store_true", help="only print failures and the verdict")

    parser = argparse.ArgumentParser(prog="polarlab", description="Run residual-verification scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run one scenario config")
    p_run.add_argument("config")

    p_suite = sub.add_parser("suite", parents=[common], help="run every *.cfg in a directory")
    p_suite.add_argument("directory", nargs="?", default=None, help="defaults to the bundled scenarios")
    p_suite.add_argument("--jobs", type=int, default=1, help="scenarios to run concurrently")

    sub.add_parser("list", help="list operations and bundled scenarios")
    return parser


def _cmd_run(args) -> int:
    summary = lab.run(args.config, args.out, args.tol_scale)
    for chk in summary.checks:
        if not (args.quiet and chk.passed):
            print(_check_line(summary.id, chk))
    verdict = "PASS" if summary.passed else "FAIL"
    print(f"{verdict}  {summary.id}: {len(summary.checks) - len(summary.failed_checks)}/{len(summary.checks)} "
          f"checks passed ({summary.wall_time:.2f} s)")
    return summary.exit_status


def _cmd_suite(args) -> int:
    suite = lab.run_suite(args.directory, args.out, args.tol_scale, jobs=max(1, args.jobs))
    failed = 0
    for row in suite.rows:
        if isinstance(row, lab.RunSummary):
            for chk in row.checks:
                if not (args.quiet and chk.passed):
                    print(_check_line(row.id, chk))
            failed += not row.passed
        else:
            sid, err = row
            print(f"FAIL  {sid}  error: {err}")
            failed += 1
    n = len(suite.rows)
    print(f"{'PASS' if suite.passed else 'FAIL'}  suite: {n - failed}/{n} scenarios passed "
          f"({suite.wall_time:.2f} s), summary in {args.out}/suite.json")
    return suite.exit_status


def _cmd_list(args) -> int:
    ops = lab.operations()
    print("operations:")
    for name in sorted(ops):
        op = ops[name]
        print(f"  {name:24s} {op.module:20s} checks: {', '.join(op.checks)}")
    print(f"bundled scenarios ({lab.bundled_dir()}):")
    for sid, _ in lab.load_suite(lab.bundled_dir()):
        print(f"  {sid}")
    return lab.EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "suite": _cmd_suite, "list": _cmd_list}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return lab.EXIT_CONFIG
    except OSError as exc:  # missing config, unreadable or unwritable paths
        print(f"config error: {exc}", file=sys.stderr)
        return lab.EXIT_CONFIG
    except PolarlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return lab.EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
