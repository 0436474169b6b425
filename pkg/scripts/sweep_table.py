"""Run a sweep config and print one row per cell: mean final loss per task and delta_p.

    python3 scripts/sweep_table.py configs/alpha_sweep.toml [--out runs/alpha_sweep]
    python3 scripts/sweep_table.py configs/beta_grid.toml
"""

import argparse
import json
import sys
from pathlib import Path

from simtl.config import load_config
from simtl.experiment import cell_name, run_experiment, sweep_cells


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    config = load_config(args.config)
    out = Path(args.out or config.out)
    code = run_experiment(config, out=out, quiet=True)
    for cell in sweep_cells(config):
        summary = json.loads((out / cell_name(cell) / "summary.json").read_text())
        if "delta_p" not in summary:
            print(f"{summary['cell']:40} all seeds diverged")
            continue
        losses = "  ".join(f"{l['mean']:.5g}+/-{l['std']:.2g}" for l in summary["final_losses"])
        dp = summary["delta_p"]
        print(f"{summary['cell']:40} {losses}  delta_p {dp['mean']:+.2f}+/-{dp['std']:.2f}")
    return code


if __name__ == "__main__":
    sys.exit(main())
