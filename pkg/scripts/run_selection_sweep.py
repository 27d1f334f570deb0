#!/usr/bin/env python3
"""Device-selection benchmark: SER thresholds vs packet rule vs no selection.

Runs the five-policy comparison (no selection, packet-error baseline, and
SER thresholds 1e-1 / 1e-2 / 1e-3) over shared seeds and prints the mean
final accuracies. Results land in results/selection_sweep/.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
from desk_task import SEEDS, desk_config

from noma_fl.config import apply_overrides
from noma_fl.experiment import run_experiment

BENCHMARKS = [
    ("no_selection", ["selection.policy=no_selection"]),
    ("packet_error_baseline", ["selection.policy=packet_error_baseline"]),
    ("tr=1e-1", ["selection.policy=ser_dsm", "selection.tr_ser=0.1"]),
    ("tr=1e-2", ["selection.policy=ser_dsm", "selection.tr_ser=0.01"]),
    ("tr=1e-3", ["selection.policy=ser_dsm", "selection.tr_ser=0.001"]),
]


def main():
    out_root = Path(__file__).resolve().parent.parent / "results" / "selection_sweep"
    print(f"{'policy':>24} {'mean acc':>10} {'std':>8}  per-seed")
    for name, overrides in BENCHMARKS:
        accs = []
        for seed in SEEDS:
            cfg = apply_overrides(desk_config(seed), overrides)
            slug = name.replace("=", "_").replace("-", "m")
            result = run_experiment(cfg, out_dir=out_root / slug / f"seed{seed}")
            accs.append(result.summary["final_test_accuracy"])
        print(f"{name:>24} {np.mean(accs):>10.4f} {np.std(accs):>8.4f}  "
              + " ".join(f"{a:.3f}" for a in accs))
    print(f"\nper-run metrics under {out_root}")


if __name__ == "__main__":
    main()
