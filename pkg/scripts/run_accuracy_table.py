"""Test accuracy of uncalibrated, shift and lightweight inference per seed and T.

    python scripts/run_accuracy_table.py --seeds 0 1 2 --T 1 2 4 8
"""

import argparse
import csv
import sys

from offsetspike.calibrate import CalibConfig, evaluate
from offsetspike.experiments import SHALLOW_SIZES, TOY_SIZES, toy_mlp

MODES = ("none", "shift", "lightweight")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--T", type=int, nargs="+", default=[1, 2, 4])
    p.add_argument("--shallow", action="store_true", help="two hidden layers instead of three")
    p.add_argument("--out", help="CSV path (default: stdout)")
    args = p.parse_args(argv)

    sizes = SHALLOW_SIZES if args.shallow else TOY_SIZES
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["seed", "T", "ann", *MODES, "total_steps_shift"])
    for seed in args.seeds:
        toy = toy_mlp(seed, sizes)
        X, y = toy.test.X, toy.test.y
        for T in args.T:
            accs = [evaluate(toy.snn, X, y, CalibConfig(mode=m, T=T)).accuracy for m in MODES]
            cost = CalibConfig(T=T).total_steps(toy.snn.L)
            w.writerow([seed, T, f"{toy.test_accuracy:.4f}", *(f"{a:.4f}" for a in accs), cost])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
