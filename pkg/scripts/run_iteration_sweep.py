"""Output-layer ratio and MSE of the offset spike versus calibration iterations.

    python scripts/run_iteration_sweep.py --iterations 0 1 2 4 --mode free
"""

import argparse

from offsetspike.calibrate import CalibConfig
from offsetspike.diagnostics import output_rows, ratio_mse_sweep, write_metrics_csv
from offsetspike.experiments import SHALLOW_SIZES, TOY_SIZES, toy_mlp


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, nargs="+", default=[0, 1, 2, 4])
    p.add_argument("--mode", choices=("free", "constrained", "matched"), default="free")
    p.add_argument("--rho", type=int)
    p.add_argument("--deep", action="store_true", help="three hidden layers instead of two")
    p.add_argument("--out", help="also write every layer to this metrics CSV")
    args = p.parse_args(argv)

    toy = toy_mlp(args.seed, TOY_SIZES if args.deep else SHALLOW_SIZES)
    rows = ratio_mse_sweep(toy.ann, toy.snn, toy.test.X, args.iterations, CalibConfig(rho=args.rho), mode=args.mode)
    print(f"train accuracy {toy.train_accuracy:.4f}, {len(toy.test)} test samples, mode {args.mode}")
    print("iterations  ratio    mse")
    for r in output_rows(rows):
        print(f"{r.iterations:>10}  {r.ratio:.4f}  {r.mse:.4f}")
    if args.out:
        write_metrics_csv(rows, args.out)


if __name__ == "__main__":
    main()
