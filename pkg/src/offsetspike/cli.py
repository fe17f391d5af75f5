"""Command-line entry point: train, convert, eval, diagnose.

Exit codes: 0 success, 2 usage, 3 bad path, 4 malformed model file,
5 incompatible shapes, 6 training failure, 7 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

from . import diagnostics as dg
from .calibrate import CalibConfig, evaluate
from .convert import convert
from .data import make_dataset
from .errors import ModelFormatError, ShapeError, TrainingDiverged
from .modelio import load_qcfs, load_snn, qcfs_to_dict, snn_to_dict
from .qcfs import BelowAccuracyFloor, TrainConfig, accuracy, init_network, train_toy

log = logging.getLogger("offsetspike")

EXIT_PATH, EXIT_MODEL, EXIT_SHAPE, EXIT_TRAIN, EXIT_CONFIG = 3, 4, 5, 6, 7
SEED_ENV = "OFFSETSPIKE_SEED"

DEFAULTS = {
    "dataset": "blobs:4:2:0.3",
    "n": 3000,
    "test_fraction": 0.5,
    "hidden": "32,32,32",
    "L": 4,
    "epochs": 100,
    "lr": 0.01,
    "batch_size": 64,
    "T": None,
    "rho": None,
    "iterations": 1,
    "epsilon": 0.5,
    "mode": "shift",
    "aggressive": False,
    "persist": False,
    "threads": 1,
    "split": "test",
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _settings(args) -> dict:
    """Merge flags > config file > defaults (flags left unset are None)."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise CliError(EXIT_PATH, f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_CONFIG, f"config file is not valid JSON: {exc.msg}") from None
        unknown = set(cfg) - set(DEFAULTS) - {"seed"}
        if unknown:
            raise CliError(EXIT_CONFIG, f"unknown config keys: {sorted(unknown)}")
        merged.update(cfg)
    for key, val in vars(args).items():
        if val is not None and (key in DEFAULTS or key == "seed"):
            merged[key] = val
    if merged.get("seed") is None:
        merged["seed"] = int(os.environ.get(SEED_ENV, 0))
    return merged


@contextmanager
def _atomic(path):
    """Write to a temp file next to ``path`` and rename on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json(doc, path):
    with _atomic(path) as tmp:
        Path(tmp).write_text(json.dumps(doc, indent=1, allow_nan=False))


def _out_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_PATH, f"cannot create output directory {p}: {exc.strerror}") from None
    return p


def _load(loader, path):
    if not Path(path).is_file():
        raise CliError(EXIT_PATH, f"no such file: {path}")
    return loader(path)


def _dataset(s, header=None):
    """Rebuild the evaluation data; model headers supply defaults."""
    spec = dict((header or {}).get("dataset") or {})
    name = s["dataset"] if s.get("_dataset_flag") or not spec else spec["name"]
    n = s["n"] if s.get("_dataset_flag") or not spec else spec["n"]
    seed = s["seed"] if s.get("_seed_flag") or not spec else spec["seed"]
    frac = spec.get("test_fraction", s["test_fraction"])
    if name.endswith(".csv") and not Path(name).is_file():
        raise CliError(EXIT_PATH, f"no such dataset file: {name}")
    ds = make_dataset(name, n=n, seed=seed)
    train, test = ds.split(frac, seed=seed)
    s["_data_seed"] = seed
    return {"train": train, "test": test, "all": ds}[s["split"]]


def _calib_cfg(s) -> CalibConfig:
    try:
        return CalibConfig(
            rho=s["rho"], T=s["T"], iterations=s["iterations"], epsilon_fraction=s["epsilon"],
            mode=s["mode"], aggressive=s["aggressive"], persist=s["persist"],
        )
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _header_of(path) -> dict:
    try:
        return json.loads(Path(path).read_text()).get("header", {})
    except (OSError, json.JSONDecodeError, AttributeError):
        return {}


def _check_width(model, X):
    if X.shape[1] != model.layers[0].weights.shape[1]:
        raise CliError(
            EXIT_SHAPE,
            f"dataset has {X.shape[1]} features but the model expects {model.layers[0].weights.shape[1]}",
        )


# ---------------------------------------------------------------- commands


def cmd_train(s, args):
    name = s["dataset"]
    if name.endswith(".csv") and not Path(name).is_file():
        raise CliError(EXIT_PATH, f"no such dataset file: {name}")
    ds = make_dataset(name, n=s["n"], seed=s["seed"])
    train, test = ds.split(s["test_fraction"], seed=s["seed"])
    hidden = [int(h) for h in str(s["hidden"]).split(",") if h]
    sizes = [ds.X.shape[1], *hidden, ds.n_classes]
    net = init_network(sizes, L=s["L"], seed=s["seed"])
    net = train_toy(
        net, train.X, train.y,
        TrainConfig(epochs=s["epochs"], lr=s["lr"], batch_size=s["batch_size"], seed=s["seed"],
                    min_accuracy=args.min_accuracy),
    )
    doc = qcfs_to_dict(net)
    doc["header"]["dataset"] = {"name": name, "n": s["n"], "seed": s["seed"], "test_fraction": s["test_fraction"]}
    _write_json(doc, args.out)
    print(f"train_accuracy={accuracy(net, train.X, train.y):.4f} "
          f"test_accuracy={accuracy(net, test.X, test.y):.4f} -> {args.out}")


def cmd_convert(s, args):
    net = _load(load_qcfs, args.ann)
    snn = convert(net)
    doc = snn_to_dict(snn, lams=[layer.lam for layer in net.layers])
    if "dataset" in (h := _header_of(args.ann)):
        doc["header"]["dataset"] = h["dataset"]
    _write_json(doc, args.out)
    print(f"converted {len(snn.layers)} layers -> {args.out}")


def cmd_eval(s, args):
    snn = _load(load_snn, args.snn)
    ds = _dataset(s, _header_of(args.snn))
    _check_width(snn, ds.X)
    cfg = _calib_cfg(s).resolve(snn.L)
    res = evaluate(snn, ds.X, ds.y, cfg, threads=s["threads"], record=bool(args.log))
    # baseline at the same total latency, for the T+rho fairness comparison
    base_cfg = CalibConfig(T=res.total_steps, mode="none", iterations=0)
    base = evaluate(snn, ds.X, ds.y, base_cfg, threads=s["threads"])
    out = _out_dir(args.out_dir)
    summary = {
        "mode": cfg.mode,
        "T": cfg.T,
        "rho": cfg.rho,
        "iterations": cfg.iterations,
        "epsilon_fraction": cfg.epsilon_fraction,
        "total_steps": res.total_steps,
        "accuracy": res.accuracy,
        "baseline_accuracy_at_total_steps": base.accuracy,
        "n_samples": len(ds),
        "dataset_seed": s["_data_seed"],
    }
    _write_json(summary, out / "eval.json")
    with _atomic(out / "eval.csv") as tmp:
        cols = list(summary)
        Path(tmp).write_text(",".join(cols) + "\n" + ",".join(str(summary[c]) for c in cols) + "\n")
    if args.log:
        with _atomic(args.log) as tmp, open(tmp, "w") as fh:
            for r in res.records:
                fh.write(json.dumps(r.as_dict()) + "\n")
    print(f"accuracy@T={cfg.T}: {res.accuracy:.4f}  "
          f"baseline@T+rho*it={res.total_steps}: {base.accuracy:.4f}")


def cmd_diagnose(s, args):
    ann = _load(load_qcfs, args.ann)
    snn = _load(load_snn, args.snn)
    ds = _dataset(s, _header_of(args.snn) or _header_of(args.ann))
    _check_width(ann, ds.X)
    if len(ann.layers) != len(snn.layers) or any(
        a.weights.shape != b.weights.shape for a, b in zip(ann.layers, snn.layers)
    ):
        raise CliError(EXIT_SHAPE, "ANN and SNN layer shapes differ")
    mode = "matched" if args.matched else ("constrained" if args.constrained else "free")
    cfg = _calib_cfg(s)
    out = _out_dir(args.out_dir)
    baseline = CalibConfig(rho=cfg.rho, T=cfg.T, iterations=0, mode="none")
    with _atomic(out / "distribution.csv") as tmp:
        dg.write_distribution_csv(dg.layer_distribution(ann, snn, ds.X, baseline, mode), tmp)
    if cfg.mode != "none":
        with _atomic(out / "distribution_calibrated.csv") as tmp:
            dg.write_distribution_csv(dg.layer_distribution(ann, snn, ds.X, cfg, mode), tmp)
    sweep = [int(v) for v in args.iterations_sweep.split(",")] if args.iterations_sweep else [cfg.iterations]
    rows = dg.ratio_mse_sweep(ann, snn, ds.X, sweep, cfg, mode=mode)
    with _atomic(out / "metrics.csv") as tmp:
        dg.write_metrics_csv(rows, tmp)
    for r in dg.output_rows(rows):
        print(f"iterations={r.iterations} ratio={r.ratio:.4f} mse={r.mse:.4f}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="offsetspike", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file of defaults (flags override it)")
        sp.add_argument("--seed", type=int, help=f"random seed (default ${SEED_ENV} or 0)")
        sp.add_argument("--dataset", help="blobs[:classes[:dim[:spread]]], xor, or a CSV path")
        sp.add_argument("--n", type=int, help="number of generated samples")
        sp.add_argument("--threads", type=int)

    def calib(sp):
        sp.add_argument("--T", type=int, help="inference steps (default L)")
        sp.add_argument("--rho", type=int, help="probe steps (default L)")
        sp.add_argument("--iterations", type=int)
        sp.add_argument("--epsilon", type=float, help="epsilon as a fraction of theta")
        sp.add_argument("--mode", choices=("shift", "lightweight", "none"))
        sp.add_argument("--aggressive", action="store_true", default=None)
        sp.add_argument("--persist", action="store_true", default=None)
        sp.add_argument("--split", choices=("test", "train", "all"))

    t = sub.add_parser("train", help="train a toy QCFS network")
    common(t)
    t.add_argument("--hidden", help="comma-separated hidden widths")
    t.add_argument("--L", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--test-fraction", dest="test_fraction", type=float)
    t.add_argument("--min-accuracy", dest="min_accuracy", type=float)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("convert", help="convert a QCFS model to an SNN")
    c.add_argument("ann")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert)

    e = sub.add_parser("eval", help="calibrate and evaluate an SNN")
    common(e)
    calib(e)
    e.add_argument("snn")
    e.add_argument("--out-dir", required=True)
    e.add_argument("--log", help="write per-sample calibration log (JSON lines)")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("diagnose", help="offset-spike distributions and ratio/MSE")
    common(d)
    calib(d)
    d.add_argument("ann")
    d.add_argument("snn")
    d.add_argument("--constrained", action="store_true")
    d.add_argument("--matched", action="store_true")
    d.add_argument("--iterations-sweep", dest="iterations_sweep")
    d.add_argument("--out-dir", required=True)
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        s = _settings(args)
        s["_dataset_flag"] = getattr(args, "dataset", None) is not None
        s["_seed_flag"] = getattr(args, "seed", None) is not None
        args.func(s, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ModelFormatError as exc:
        print(f"error: malformed model file: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ShapeError as exc:
        print(f"error: incompatible shapes: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (TrainingDiverged, BelowAccuracyFloor) as exc:
        print(f"error: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: bad path: {exc}", file=sys.stderr)
        return EXIT_PATH
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
