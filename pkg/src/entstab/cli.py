"""Command-line experiment runner.

Subcommands:
    run CONFIG     execute the scenario described by a config file
    audit CONFIG   convergence audit (doubled cutoff, halved step)
    table1         run the four-scheme comparison with preset parameters

Exit codes: 0 success, 2 configuration error, 3 integrator abort,
4 audit failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, EntstabError, IntegratorAbortError
from .experiments import (ExperimentConfig, convergence_audit, parse_config,
                          run_scenario)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATOR = 3
EXIT_AUDIT = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entstab",
        description="Dissipative entanglement stabilization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker pool size for grids")
        p.add_argument("--tier", choices=("effective", "full", "lab"),
                       default=None, help="model tier override")

    p_run = sub.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("config", help="path to the config file")
    common(p_run)

    p_audit = sub.add_parser("audit", help="convergence audit from a config")
    p_audit.add_argument("config", help="path to the config file")
    common(p_audit)

    p_tab = sub.add_parser("table1", help="four-scheme comparison run")
    common(p_tab)
    return parser


def _load_config(path: str) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text())


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.out is not None:
        cfg.out = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.workers = args.workers
    if args.tier is not None:
        cfg.tier = {"effective": "effective", "full": "full_squeezed",
                    "lab": "lab_frame"}[args.tier]
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "table1":
            cfg = ExperimentConfig(scenario="table1")
        else:
            cfg = _load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        out_dir = Path(cfg.out or "out")

        if args.command == "audit":
            report = convergence_audit(cfg)
            print(f"cutoff doubling: max|dP_S| = {report.cutoff_delta:.3e} "
                  f"({'pass' if report.cutoff_passed else 'FAIL'} < 1e-3)")
            print(f"dt halving:      max|dP_S| = {report.dt_delta:.3e} "
                  f"({'pass' if report.dt_passed else 'FAIL'} < 1e-6)")
            print(f"dt order ratio:  {report.order_ratio:.2f} "
                  f"({'pass' if report.order_passed else 'FAIL'}, expect ~16)")
            return EXIT_OK if report.passed else EXIT_AUDIT

        records = run_scenario(cfg, out_dir)
        for rec in records:
            s = rec.summary
            t_s = "none" if s.t_s is None else f"{s.t_s:9.1f}"
            print(f"{s.scenario_tag:<16} t_S = {t_s}  F = {s.fidelity:.4f}")
            for w in s.warnings:
                print(f"  warning: {w}", file=sys.stderr)
        print(f"outputs in {out_dir}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegratorAbortError as exc:
        print(f"integrator abort: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    except EntstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
