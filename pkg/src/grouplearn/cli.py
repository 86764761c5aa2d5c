"""Command-line front end for the experiment harness.

Subcommands: run one experiment, sweep a config grid, validate a config
without running it, or print the analysis-scale parameter prescriptions.
Configs are JSON documents; see the package README for the schema. Exit
codes: 0 on full success, 1 when a run completed but some seed or sweep
cell failed, 2 on a rejected config or unreadable input.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    ConfigError,
    config_from_dict,
    config_to_dict,
    run_experiment,
    sweep,
    theory_params,
)


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {what} {path!r}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what} {path!r} is not valid JSON: {e}") from None


def _apply_flags(doc: dict, args: argparse.Namespace) -> dict:
    if getattr(args, "seed", None) is not None:
        doc["seeds"] = [args.seed]
    if getattr(args, "out", None) is not None:
        doc["out_dir"] = args.out
    if getattr(args, "diagnostics", False):
        doc["diagnostics"] = True
    if getattr(args, "freeze_gftpl_noise", False):
        doc["freeze_gftpl_noise"] = True
    return doc


def _cmd_run(args: argparse.Namespace) -> int:
    doc = _apply_flags(_load_json(args.config, "config"), args)
    report = run_experiment(doc)
    failed = [s for s in report["seeds"] if s["status"] != "ok"]
    summary = {
        "run_name": report["run_name"],
        "report": report["report_path"],
        "aggregate": report["aggregate"],
        "failed_seeds": [s["seed"] for s in failed],
    }
    print(json.dumps(summary, indent=2))
    return 1 if failed else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    doc = _apply_flags(_load_json(args.config, "config"), args)
    grid = _load_json(args.grid, "grid")
    report = sweep(doc, grid, out_dir=args.out)
    failed = [c["cell"] for c in report["cells"] if c["status"] != "ok"]
    summary = {
        "axes": report["axes"],
        "cells": len(report["cells"]),
        "failed_cells": failed,
        "summary_csv": report["summary_csv"],
        "report": report["report_path"],
    }
    print(json.dumps(summary, indent=2))
    return 1 if failed else 0


def _cmd_validate(args: argparse.Namespace) -> int:
    doc = _apply_flags(_load_json(args.config, "config"), args)
    cfg = config_from_dict(doc)
    print(json.dumps({"valid": True, "resolved": config_to_dict(cfg)}, indent=2))
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    tp = theory_params(args.T, args.sigma, args.K)
    print(
        json.dumps(
            {
                "T": args.T,
                "sigma": args.sigma,
                "K": args.K,
                "M_theory": tp.M_theory,
                "n_theory": tp.n_theory,
                "eta_theory": tp.eta_theory,
                "delta": tp.delta,
            },
            indent=2,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grouplearn",
        description="Oracle-efficient online multi-group learning experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--seed", type=int, help="replace the config's seed list with this one seed")
    run_p.add_argument("--out", help="override the output directory")
    run_p.add_argument("--diagnostics", action="store_true", help="record per-round game-value diagnostics")
    run_p.add_argument(
        "--freeze-gftpl-noise",
        action="store_true",
        help="draw one shared noise vector per seed instead of per oracle call",
    )
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run the cross product of a config grid")
    sweep_p.add_argument("--config", required=True, help="path to the base JSON config")
    sweep_p.add_argument(
        "--grid",
        required=True,
        help="path to a JSON object mapping dotted config paths to value lists",
    )
    sweep_p.add_argument("--seed", type=int, help="replace the config's seed list with this one seed")
    sweep_p.add_argument("--out", help="sweep output directory (cells go in subdirectories)")
    sweep_p.add_argument("--diagnostics", action="store_true", help="record per-round game-value diagnostics")
    sweep_p.add_argument(
        "--freeze-gftpl-noise",
        action="store_true",
        help="draw one shared noise vector per seed instead of per oracle call",
    )
    sweep_p.set_defaults(func=_cmd_sweep)

    val_p = sub.add_parser("validate-config", help="parse and resolve a config without running")
    val_p.add_argument("--config", required=True, help="path to the JSON config")
    val_p.add_argument("--seed", type=int, help="apply the seed override before validating")
    val_p.add_argument("--out", help="apply the output-directory override before validating")
    val_p.add_argument("--diagnostics", action="store_true", help=argparse.SUPPRESS)
    val_p.add_argument("--freeze-gftpl-noise", action="store_true", help=argparse.SUPPRESS)
    val_p.set_defaults(func=_cmd_validate)

    th_p = sub.add_parser(
        "theory-params", help="print the analysis-scale parameter prescriptions"
    )
    th_p.add_argument("--T", type=int, required=True, help="horizon (>= 2)")
    th_p.add_argument("--sigma", type=float, required=True, help="smoothness in (0, 1]")
    th_p.add_argument("--K", type=int, required=True, help="hypothesis count (>= 2)")
    th_p.set_defaults(func=_cmd_theory)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
