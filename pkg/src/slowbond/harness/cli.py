"""Command-line entry point: ``slowbond run|validate|cost|presets``.

Exit codes: 0 when every verdict passes, 1 when any verdict fails,
2 for usage, config, preset or budget errors.
"""
from __future__ import annotations

import argparse
import sys

from .config import REGION_LABELS, REGIONS, ConfigError, ExperimentConfig, load
from .experiments import estimate_events, run_experiment
from .report import emit_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slowbond", description="Slow-bond exclusion process experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def overrides(p):
        p.add_argument("config", help="experiment config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--replicas", type=int, help="replica count R")
        p.add_argument("--budget-events", type=float, help="ceiling on the estimated number of events")

    run = sub.add_parser("run", help="run an experiment and write a report")
    overrides(run)
    run.add_argument("--out-dir", help="report directory")
    run.add_argument("--format", choices=("csv", "json"), help="report format")
    run.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    overrides(sub.add_parser("validate", help="parse and check a config"))
    overrides(sub.add_parser("cost", help="print the estimated event count"))
    sub.add_parser("presets", help="list model presets")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load(args.config)
    cfg = cfg.with_overrides(seed=args.seed, replicas=args.replicas, budget_events=args.budget_events,
                             out_dir=getattr(args, "out_dir", None), fmt=getattr(args, "format", None))
    if getattr(args, "figures", False):
        cfg = cfg.with_overrides(figures=True)
    from .config import validate

    validate(cfg)
    return cfg


def _presets() -> int:
    for name, r in REGIONS.items():
        print(f"{name:14s} beta={r['beta']:<5g} gamma={r['gamma']:<5g} alpha={r['alpha']:<4g} a={r['a']:<4g} "
              f"{REGION_LABELS[name]}")
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        return _presets()
    try:
        cfg = _config(args)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg.kind}, {estimate_events(cfg):.3g} events)")
            return EXIT_PASS
        if args.command == "cost":
            cost = estimate_events(cfg)
            print(f"{cost:.6g} events (budget {cfg.budget_events:.6g})")
            return EXIT_PASS if cost <= cfg.budget_events else EXIT_USAGE
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"slowbond: {exc}", file=sys.stderr)
        return EXIT_USAGE
    paths = emit_report(report, cfg.fmt, cfg.out_dir, cfg.name or cfg.kind)
    if cfg.figures:
        from .plotting import render

        try:
            paths += render(report, cfg.out_dir, cfg.name or cfg.kind)
        except ImportError as exc:
            print(f"slowbond: {exc}", file=sys.stderr)
            return EXIT_USAGE
    for row in report.rows:
        if row.verdict != "info":
            print(f"{row.verdict.upper():4s} {row.quantity} n={row.n} t={row.t:g} "
                  f"estimate={row.estimate:.6g} predictor={row.predictor:.6g} ({row.rule})")
    for path in paths:
        print(f"wrote {path}")
    print(f"runtime {report.runtime:.1f} s", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
