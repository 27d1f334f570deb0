"""Command-line entry points: run, sweep, validate-ser."""

import argparse
import json
import sys

from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .experiment import SWEEP_AXES, run_experiment, sweep, validate_ser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.override:
        cfg = apply_overrides(cfg, args.override)
    return cfg


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted config override, e.g. selection.tr_ser=0.01 (repeatable)",
    )


def _parse_values(raw: str, axis: str):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if axis == "modulation_order":
        return [int(p) for p in parts]
    if axis == "tr_ser":
        return [float(p) for p in parts]
    return parts


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg, out_dir=args.out)
    last = result.records[-1]
    print(
        f"run complete: {cfg.training.rounds} rounds, "
        f"final test accuracy {last.test_accuracy:.4f}, "
        f"final train loss {last.train_loss:.4f}"
    )
    if args.out:
        print(f"metrics written under {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = _parse_values(args.values, args.axis)
    _, comparison = sweep(cfg, args.axis, values, out_dir=args.out)
    for row in comparison:
        print(
            f"{args.axis}={row['value']}: final accuracy {row['final_test_accuracy']:.4f}, "
            f"mean SER {row['mean_ser']:.3e}"
        )
    if args.out:
        print(f"per-member metrics written under {args.out}")
    return 0


def cmd_validate_ser(args) -> int:
    cfg = _load(args)
    order = 1 << cfg.modem.bits_per_symbol
    snrs = [float(s) for s in args.snr_db.split(",")]
    rows = validate_ser(order, snrs, num_symbols=args.symbols, seed=cfg.seed)
    print(f"{'SNR dB':>8} {'analytic':>12} {'empirical':>12} {'z':>8}")
    worst = 0.0
    for row in rows:
        worst = max(worst, abs(row["z_score"]))
        print(
            f"{row['snr_db']:8.2f} {row['analytic_ser']:12.6e} "
            f"{row['empirical_ser']:12.6e} {row['z_score']:8.2f}"
        )
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"report written to {args.out}")
    print(f"max |z| over {len(rows)} points: {worst:.2f} (3.0 is the usual gate)")
    return 0 if worst <= 3.0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noma-fl",
        description="Federated learning over a NOMA uplink: simulate, sweep, validate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_common(p_run)
    p_run.add_argument("--out", help="directory for metrics.csv and the JSON summary")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one experiment per axis value")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")
    p_sweep.add_argument("--out", help="directory for per-member metrics")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser(
        "validate-ser", help="Monte-Carlo vs analytic symbol error rate report"
    )
    _add_common(p_val)
    p_val.add_argument(
        "--snr-db", default="8,10,12,14,16", help="comma-separated SNR points in dB"
    )
    p_val.add_argument("--symbols", type=int, default=1_000_000)
    p_val.add_argument("--out", help="optional JSON report path")
    p_val.set_defaults(func=cmd_validate_ser)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
