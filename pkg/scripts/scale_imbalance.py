"""Scale-imbalance benchmark on the 10-d quadratic pair (scales 1 and 1000).

Reports each method's final normalized gaps (l_t - l_t*) / l_t* per seed at
the shared learning rate, and again for EW at the largest step size that keeps
it stable (lr < 2 / (2 * 1001)), since EW diverges at lr = 0.01.

    python3 scripts/scale_imbalance.py [--steps 2000] [--seeds 0 1 2] [--csv out.csv]
"""

import argparse
import csv
import sys

import numpy as np

from simtl.errors import DivergenceError
from simtl.tasks import make_scaled_quadratic_pair
from simtl.trainer import Method, TrainConfig, train


def gaps(ts, method, lr, steps, seed):
    trace = train(TrainConfig(method=method, lr=lr, steps=steps, seed=seed), ts)
    stars = [ts.stl_reference(t).loss for t in range(ts.num_tasks)]
    return [(l - s) / s for l, s in zip(trace.final_losses, stars)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--lr", type=float, default=0.01)
    ap.add_argument("--stable-lr", type=float, default=9e-4)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--csv", help="also write rows to this file")
    args = ap.parse_args(argv)

    e1 = np.eye(10)[0]
    ts = make_scaled_quadratic_pair(10, [e1, -e1], [1.0, 1000.0], offset=0.1)
    runs = [(m.value, args.lr) for m in Method] + [("ew", args.stable_lr), ("si_mtl", args.stable_lr)]
    rows = []
    for method, lr in runs:
        for seed in args.seeds:
            try:
                g = gaps(ts, method, lr, args.steps, seed)
                rows.append([method, lr, seed, g[0], g[1], ""])
            except DivergenceError as exc:
                rows.append([method, lr, seed, "", "", f"diverged at step {exc.step}"])

    print(f"{'method':8} {'lr':>8} {'seed':>4} {'gap small':>12} {'gap large':>12}")
    for m, lr, seed, g0, g1, note in rows:
        if note:
            print(f"{m:8} {lr:8.2g} {seed:4d} {note}")
        else:
            print(f"{m:8} {lr:8.2g} {seed:4d} {g0:12.4g} {g1:12.4g}")
    by = {(m, lr, s): (g0, g1) for m, lr, s, g0, g1, note in rows if not note}
    for lr in (args.lr, args.stable_lr):
        for s in args.seeds:
            if ("ew", lr, s) in by and ("si_mtl", lr, s) in by:
                ratio = by[("ew", lr, s)][0] / by[("si_mtl", lr, s)][0]
                print(f"lr {lr:g} seed {s}: EW / SI-MTL small-task gap = {ratio:.3g}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "lr", "seed", "gap_small", "gap_large", "note"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
