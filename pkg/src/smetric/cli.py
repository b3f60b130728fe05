"""Command-line entry point.

Exit codes: 0 when the command ran (verdicts never change it), 2 for a
config or usage error, 3 for a runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .density import natural_density, parse_index_set
from .errors import ConfigError, SMetricError, UsageError
from .harness import limitset_rows, load_config, run_config
from .report import to_csv, to_json, write_report
from .suite import verify_suite

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _emit(rows, path, fmt):
    if path:
        write_report(rows, path, fmt)
    else:
        sys.stdout.write(to_json(rows) if fmt == "json" else to_csv(rows))


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    rows = run_config(cfg)
    _emit(rows, args.out or cfg.output_path, args.format or cfg.output_format)
    return EXIT_OK


def cmd_limitset(args) -> int:
    cfg = load_config(args.config)
    rows = limitset_rows(cfg)
    _emit(rows, args.out or cfg.output_path, args.format or cfg.output_format)
    return EXIT_OK


def cmd_verify(args) -> int:
    result = verify_suite(args.scale, include_broken=args.include_broken)
    for line in result.lines():
        print(line)
    failed = sum(r.status == "FAIL" for r in result.results)
    print(f"{len(result.results)} properties, {failed} failed")
    if args.out:
        write_report(result.rows, args.out, "csv")
    return EXIT_OK


def cmd_density(args) -> int:
    try:
        ns = [int(float(x)) for x in args.n.split(",")]
    except ValueError:
        raise ConfigError(f"--n must be a comma-separated list of integers, got {args.n!r}") from None
    try:
        s = parse_index_set(args.expr)
        est = natural_density(s, ns)
    except UsageError as exc:
        raise ConfigError(str(exc)) from None
    print("n,count,ratio,block_ratio")
    for (n, c), t in zip(est.prefix_counts, est.trend):
        print(f"{n},{c},{c / n:.9g},{t:.9g}")
    exact = "" if est.exact is None else f" exact={est.exact:.9g}"
    print(f"# {s}: {est.describe()}{exact}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smetric", description="Statistical convergence experiments in S-metric spaces.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the analyses of a config file")
    run.add_argument("config")
    run.add_argument("--out", help="report path (default: [output] path, else stdout)")
    run.add_argument("--format", choices=("csv", "json"))
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the property suite over the built-in family zoo")
    ver.add_argument("--scale", choices=("smoke", "full"), default="smoke")
    ver.add_argument("--out", help="write per-instance rows as CSV")
    ver.add_argument("--include-broken", action="store_true", help="add a rule that fails the axioms")
    ver.set_defaults(func=cmd_verify)

    den = sub.add_parser("density", help="estimate the natural density of an index set")
    den.add_argument("expr")
    den.add_argument("--n", default="1000,10000,100000,1000000", help="comma-separated prefix lengths")
    den.set_defaults(func=cmd_density)

    ls = sub.add_parser("limitset", help="grid search for rough statistical limits")
    ls.add_argument("config")
    ls.add_argument("--out")
    ls.add_argument("--format", choices=("csv", "json"))
    ls.set_defaults(func=cmd_limitset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SMetricError, OSError, ValueError, ArithmeticError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
