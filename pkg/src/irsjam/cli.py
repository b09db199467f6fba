"""Command-line entry point: validate configs, run single trainings, run
sweeps, summarize persisted records, and run the bundled demo comparison.
Report-producing verbs write figures next to the CSV output."""

from __future__ import annotations

import argparse
import importlib.resources
import json
import sys
from pathlib import Path

from . import harness, plots
from .config import (APPROACHES, ConfigError, SWEEP_AXES, apply_overrides,
                     config_from_dict, load_config_with_overrides)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUN = 4


def bundled_config_text(name: str = "demo") -> str:
    return importlib.resources.files("irsjam.configs").joinpath(f"{name}.json").read_text()


def _load(args, require_path=True):
    if getattr(args, "config", None):
        return load_config_with_overrides(args.config, args.set or [])
    if not require_path:
        raw = apply_overrides(json.loads(bundled_config_text("demo")), args.set or [])
        return config_from_dict(raw), raw
    raise ConfigError("--config is required")


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, metavar="PATH",
                   help="experiment config file (JSON)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                   help="dotted-path config override, e.g. agent.epsilon=0.2 (repeatable)")


def _add_run_flags(p):
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--seed", action="append", type=int, default=None,
                   help="seed (repeatable; defaults to the config's seed list)")
    p.add_argument("--approach", action="append", choices=APPROACHES, default=None,
                   help="approach to run (repeatable; defaults to the config's list)")
    p.add_argument("--parallel", type=int, default=1, help="concurrent runs (default 1)")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irsjam",
        description="Anti-jamming downlink simulator with a reflecting surface and "
                    "tabular learners for joint power allocation and phase control.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", help="schema-check a config file")
    _add_common(p)

    p = sub.add_parser("train", help="run one training")
    _add_common(p)
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p)
    _add_run_flags(p)
    p.add_argument("--axis", choices=SWEEP_AXES, default="p_max",
                   help="swept parameter (default p_max)")

    p = sub.add_parser("summarize", help="summarize previously persisted runs")
    p.add_argument("--records", required=True, metavar="DIR",
                   help="output directory of an earlier train/sweep/demo")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("demo", help="bundled four-approach comparison at desk scale")
    p.add_argument("--config", metavar="PATH", default=None,
                   help="override the bundled demo config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[])
    _add_run_flags(p)
    return parser


def _cmd_validate(args) -> int:
    cfg, _ = _load(args)
    print(f"ok: config valid (hash {cfg.config_hash()}, "
          f"{len(cfg.seeds)} seed(s), approaches: {', '.join(cfg.approaches)})")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg, raw = _load(args)
    seeds = args.seed or cfg.seeds[:1]
    approaches = args.approach or cfg.approaches[:1]
    if len(seeds) != 1 or len(approaches) != 1:
        print("error[usage]: train runs exactly one (approach, seed); "
              "use sweep for batches", file=sys.stderr)
        return EXIT_USAGE
    record = harness.run_training(cfg, approaches[0], seeds[0], config_echo=raw)
    csv_path, meta_path = harness.write_run_record(record, args.out)
    harness.write_summary(harness.summarize([record]), Path(args.out) / "summary.csv")
    if not args.no_figures:
        plots.save_training_curves([record], Path(args.out) / "figures" / "training.png")
    print(f"wrote {csv_path} (final rate {record.final_rate:.4f} bits/s/Hz, "
          f"converged at step {record.convergence_iteration})")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg, _ = _load(args)
    records, summary_rows, failures = harness.run_sweep(
        cfg, args.axis, args.out, approaches=args.approach, seeds=args.seed,
        parallel=args.parallel)
    for f in failures:
        print(f"error[run]: {f['approach']} axis={f['axis_value']} seed={f['seed']} failed",
              file=sys.stderr)
    if records and not args.no_figures:
        label = "p_max (dBm)" if args.axis == "p_max" else "surface elements"
        plots.save_sweep_curves(summary_rows, Path(args.out) / "figures" / "sweep.png", label)
    print(f"wrote {len(records)} run(s) and summary.csv under {args.out}")
    return EXIT_RUN if failures else EXIT_OK


def _cmd_summarize(args) -> int:
    records_dir = Path(args.records) / "runs"
    metas = sorted(records_dir.glob("run_*.json"))
    if not metas:
        print(f"error[usage]: no run records under {records_dir}", file=sys.stderr)
        return EXIT_USAGE
    records = [harness.load_run_record(m) for m in metas]
    rows = harness.summarize(records)
    path = harness.write_summary(rows, Path(args.records) / "summary.csv")
    if not args.no_figures:
        if any(r.axis_name for r in records):
            plots.save_sweep_curves(rows, Path(args.records) / "figures" / "sweep.png")
        else:
            plots.save_training_curves(records, Path(args.records) / "figures" / "training.png")
    print(f"wrote {path} ({len(rows)} row(s) from {len(records)} run(s))")
    return EXIT_OK


def _cmd_demo(args) -> int:
    if args.config:
        cfg, raw = load_config_with_overrides(args.config, args.set or [])
    else:
        raw = apply_overrides(json.loads(bundled_config_text("demo")), args.set or [])
        cfg = config_from_dict(raw)
    records, summary_rows, failures = harness.run_many(
        cfg, args.out, approaches=args.approach, seeds=args.seed or cfg.seeds,
        parallel=args.parallel, config_echo=raw)
    for f in failures:
        print(f"error[run]: {f['approach']} seed={f['seed']} failed", file=sys.stderr)
    if records and not args.no_figures:
        plots.save_training_curves(records, Path(args.out) / "figures" / "training.png")
    for row in summary_rows:
        print(f"{row['approach']:>12}: final rate {row['mean_final_rate']:.4f} "
              f"bits/s/Hz, mean convergence step {row['mean_convergence_iteration']:.0f}")
    return EXIT_RUN if failures else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"validate": _cmd_validate, "train": _cmd_train, "sweep": _cmd_sweep,
                "summarize": _cmd_summarize, "demo": _cmd_demo}
    try:
        return handlers[args.verb](args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error[run]: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    raise SystemExit(main())
