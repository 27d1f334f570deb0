#!/usr/bin/env python3
"""Modulation-order comparison: accuracy trajectories for M in {4,...,64}.

All devices participate (no selection), so the effect of the quantization
level / constellation order on learning shows up in isolation. Results land
in results/modulation_sweep/ as per-member CSVs plus a summary table.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
from desk_task import SEEDS, desk_config

from noma_fl.config import apply_overrides
from noma_fl.experiment import sweep

ORDERS = [4, 8, 16, 32, 64]


def main():
    out_root = Path(__file__).resolve().parent.parent / "results" / "modulation_sweep"
    final = {m: [] for m in ORDERS}
    for seed in SEEDS:
        cfg = apply_overrides(desk_config(seed), ["selection.policy=no_selection"])
        results, comparison = sweep(cfg, "modulation_order", ORDERS, out_dir=out_root / f"seed{seed}")
        for row in comparison:
            final[row["value"]].append(row["final_test_accuracy"])
    print(f"{'M':>4} {'mean acc':>10} {'std':>8}  per-seed")
    for m in ORDERS:
        accs = final[m]
        print(f"{m:>4} {np.mean(accs):>10.4f} {np.std(accs):>8.4f}  " + " ".join(f"{a:.3f}" for a in accs))
    print(f"\nper-member metrics under {out_root}")


if __name__ == "__main__":
    main()
