"""Per-layer offset-spike histograms, free versus constrained, before and after calibration.

    python scripts/run_distribution.py --seed 0 --out-dir results/
"""

import argparse
from pathlib import Path

from offsetspike.calibrate import CalibConfig
from offsetspike.diagnostics import layer_distribution, write_distribution_csv
from offsetspike.experiments import toy_mlp


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    args = p.parse_args(argv)

    toy = toy_mlp(args.seed)
    runs = {
        "free": (CalibConfig(mode="none"), "free"),
        "constrained": (CalibConfig(mode="none"), "constrained"),
        "free_shift": (CalibConfig(iterations=1), "free"),
    }
    for name, (cfg, mode) in runs.items():
        reps = layer_distribution(toy.ann, toy.snn, toy.test.X, cfg, mode)
        print(f"== {name}")
        for rep in reps:
            wide = rep.mass(lambda k: abs(k) > 1)
            print(f"  layer {rep.layer}: ratio {rep.ratio:.4f} mse {rep.mse:.4f} |psi|>1 {wide:.5f} {rep.histogram}")
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            write_distribution_csv(reps, Path(args.out_dir) / f"distribution_{name}.csv")


if __name__ == "__main__":
    main()
