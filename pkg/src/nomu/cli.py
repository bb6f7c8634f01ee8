"""Command line entry point: ``nomu run | report | plot | schema``."""

from __future__ import annotations

import argparse
import json
import sys

from .experiment import WORKERS_ENV, ConfigError, ExperimentConfig, config_schema, report_text, run_experiment
from .plotting import KINDS, plot_dir


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    def progress(cell, err):
        status = "FAILED" if err else "ok"
        print(f"{'/'.join(str(p) for p in cell if p is not None)}: {status}", file=sys.stderr, flush=True)

    summary = run_experiment(cfg, args.out, args.workers, progress=None if args.quiet else progress)
    print(f"{summary.out}: {summary.done} cells run, {summary.skipped} already complete, "
          f"{len(summary.failures)} failed")
    for cell, err in summary.failures.items():
        print(f"  {cell}: {err.splitlines()[0]}", file=sys.stderr)
    return 0 if summary.ok else 1


def _cmd_report(args) -> int:
    try:
        print(report_text(args.dir))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_plot(args) -> int:
    try:
        paths = plot_dir(args.dir, args.kind, args.run)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


def _cmd_schema(args) -> int:
    print(json.dumps(config_schema(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nomu", description="Uncertainty-bound experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run (or resume) an experiment matrix",
                       epilog=f"The worker count defaults to ${WORKERS_ENV} (1 if unset).")
    r.add_argument("config", help="experiment config (JSON)")
    r.add_argument("--out", help="output directory (default: the config's 'output', next to it)")
    r.add_argument("--workers", type=int, default=None, help=f"overrides ${WORKERS_ENV}")
    r.add_argument("--quiet", action="store_true", help="no per-cell progress lines")
    r.set_defaults(fn=_cmd_run)

    rep = sub.add_parser("report", help="rebuild and print aggregates of an output directory")
    rep.add_argument("dir")
    rep.set_defaults(fn=_cmd_report)

    pl = sub.add_parser("plot", help="write SVG figures of an output directory")
    pl.add_argument("dir")
    pl.add_argument("--kind", required=True, choices=KINDS)
    pl.add_argument("--run", type=int, default=0, help="run index for per-run figures")
    pl.set_defaults(fn=_cmd_plot)

    s = sub.add_parser("schema", help="print the config JSON schema")
    s.set_defaults(fn=_cmd_schema)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
