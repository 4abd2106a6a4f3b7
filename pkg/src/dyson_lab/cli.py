"""Command-line entry point: ``dyson-lab run | verify | report``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .evolution import NumericalFailure
from .harness import runner
from .harness.records import RunRecord
from .harness.scenarios import ConfigError, load_scenario


def _run(args) -> int:
    scenario = load_scenario(args.scenario)
    out = Path(args.out) if args.out else Path("runs") / scenario.name
    rec = runner.run_scenario(scenario, out)
    print(runner.format_table([rec]))
    print(f"wrote {out}")
    return runner.EXIT_OK if rec.passed else runner.EXIT_CHECK_FAILED


def _verify(args) -> int:
    results, status = runner.verify(args.suite, args.out, plots=args.plots)
    print(runner.format_table(results))
    if args.out:
        print(f"verdicts written to {Path(args.out) / 'verdicts.json'}")
    return status


def _report(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        rec = RunRecord.load(run_dir / "run.json")
    except FileNotFoundError:
        raise ConfigError(f"{run_dir} has no run.json") from None
    out = Path(args.out) if args.out else run_dir
    for p in runner.write_report(rec, out, [args.format], plots=not args.no_plots):
        print(p)
    return runner.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyson-lab", description="Viscous Dyson equation laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("scenario")
    p.add_argument("--out")
    p.set_defaults(func=_run)

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("--suite", default=None, help=f"one of {runner.suite_names()} or a built-in scenario name")
    p.add_argument("--out")
    p.add_argument("--plots", action="store_true", help="also render PNGs for every scenario")
    p.set_defaults(func=_verify)

    p = sub.add_parser("report", help="re-emit files from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--format", choices=["csv", "json", "plot-data"], required=True)
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.add_argument("--no-plots", action="store_true", help="plot-data only, skip PNG rendering")
    p.set_defaults(func=_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return runner.EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
