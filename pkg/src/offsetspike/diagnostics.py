"""Offset-spike distributions and ratio/MSE metrics.

Three ways of pairing each SNN layer with its ANN counterpart:

``free``
    each network propagates its own activations.
``constrained``
    the ANN layer input is replaced by the SNN's realized rate
    phi^{l-1}(T), i.e. ``a^l = f(W^l phi^{l-1}(T))``. Isolates the error
    introduced by a single layer.
``matched``
    like constrained, but the ANN pre-activation is built from the exact
    current total the spiking neuron integrated, so the two sides see the
    same floating-point number.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .calibrate import CalibConfig, calibrate_network
from .convert import SnnNetwork
from .errors import GridError, ShapeError
from .ifcore import LayerTrace
from .qcfs import QcfsNetwork, ann_forward, qcfs_activation, qcfs_level_from_total

GRID_TOL = 1e-6
MODES = ("free", "constrained", "matched")


def offset_from_counts(a, counts, theta: float, T: int) -> np.ndarray:
    """psi = a*T/theta - count, with a*T/theta checked to be an integer."""
    designed = np.asarray(a, dtype=np.float64) * T / theta
    rounded = np.rint(designed)
    bad = np.abs(designed - rounded) > GRID_TOL
    if np.any(bad):
        worst = float(np.max(np.abs(designed - rounded)))
        raise GridError(
            f"a*T/theta is off the integer grid by up to {worst:.3g}; "
            "check lambda == theta and T == L"
        )
    return rounded.astype(np.int64) - np.asarray(counts, dtype=np.int64)


def offset_spike(a, trace: LayerTrace, T: int | None = None) -> np.ndarray:
    """Offset spike of every neuron for an ANN activation ``a`` and an SNN trace."""
    T = trace.steps if T is None else T
    if T != trace.steps:
        raise ShapeError(f"T={T} but trace has {trace.steps} steps")
    return offset_from_counts(a, trace.counts, trace.theta, T)


@dataclass
class OffsetReport:
    layer: int
    histogram: dict[int, int]
    ratio: float
    mse: float
    mode: str
    n: int
    per_sample: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_psi(cls, layer: int, psi: np.ndarray, mode: str, keep: bool = False):
        psi = np.asarray(psi, dtype=np.int64)
        hist = dict(sorted(Counter(psi.ravel().tolist()).items()))
        n = psi.size
        return cls(
            layer=layer,
            histogram=hist,
            ratio=float(np.count_nonzero(psi == 0) / n) if n else 1.0,
            mse=float(np.mean(psi.astype(np.float64) ** 2)) if n else 0.0,
            mode=mode,
            n=n,
            per_sample=psi if keep else None,
        )

    def mass(self, pred) -> float:
        """Fraction of neurons whose psi satisfies ``pred``."""
        return sum(c for k, c in self.histogram.items() if pred(k)) / self.n


def _batched_runs(snn, X, cfg, batch_size):
    counts, totals = None, None
    for lo in range(0, len(X), batch_size):
        r = calibrate_network(snn, X[lo : lo + batch_size], cfg)
        if counts is None:
            counts, totals = [[c] for c in r.counts], [[t] for t in r.input_totals]
        else:
            for i, (c, t) in enumerate(zip(r.counts, r.input_totals)):
                counts[i].append(c)
                totals[i].append(t)
    return [np.concatenate(c) for c in counts], [np.concatenate(t) for t in totals]


def _check_pair(ann: QcfsNetwork, snn: SnnNetwork, T: int):
    if len(ann.layers) != len(snn.layers) or ann.linear_head != snn.linear_head:
        raise ShapeError("ANN and SNN have different layer structure")
    if T != ann.L:
        raise ValueError(f"offset spikes need T == L (T={T}, L={ann.L})")
    for i, (a, s) in enumerate(zip(ann.layers, snn.layers)):
        if a.lam != s.theta:
            raise ValueError(f"layer {i}: lambda {a.lam} != theta {s.theta}")
        if not np.array_equal(a.weights, s.weights):
            raise ValueError(f"layer {i}: weights differ between ANN and SNN")


def layer_psi(ann: QcfsNetwork, snn: SnnNetwork, X, cfg: CalibConfig | None = None,
              mode: str = "free", batch_size: int = 512) -> list[np.ndarray]:
    """psi arrays ``(n_samples, width)`` for every spiking layer."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    cfg = (cfg or CalibConfig(iterations=0, mode="none")).resolve(snn.L)
    T = cfg.T
    _check_pair(ann, snn, T)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    counts, totals = _batched_runs(snn, X, cfg, batch_size)
    acts, _ = ann_forward(ann, X) if mode == "free" else (None, None)
    out = []
    for l, layer in enumerate(ann.layers[: ann.n_activated]):
        theta = snn.layers[l].theta
        if mode == "free":
            psi = offset_from_counts(acts[l], counts[l], theta, T)
        elif mode == "constrained":
            prev = X if l == 0 else counts[l - 1] * snn.layers[l - 1].theta / T
            a = qcfs_activation(prev @ layer.weights.T, layer.lam, layer.L)
            psi = offset_from_counts(a, counts[l], theta, T)
        else:
            level = qcfs_level_from_total(totals[l], layer.lam, layer.L, T)
            psi = level - counts[l]
        out.append(psi)
    return out


def layer_distribution(ann: QcfsNetwork, snn: SnnNetwork, X, cfg: CalibConfig | None = None,
                       constrained: bool | str = False, per_sample: bool = False,
                       batch_size: int = 512) -> list[OffsetReport]:
    """Per-layer offset-spike histograms aggregated over all samples.

    ``constrained`` may be a bool or a mode name (``free``, ``constrained``,
    ``matched``).
    """
    mode = constrained if isinstance(constrained, str) else ("constrained" if constrained else "free")
    psis = layer_psi(ann, snn, X, cfg, mode, batch_size)
    return [OffsetReport.from_psi(l, p, mode, keep=per_sample) for l, p in enumerate(psis)]


@dataclass(frozen=True)
class SweepRow:
    iterations: int
    layer: int
    ratio: float
    mse: float


def ratio_mse_sweep(ann: QcfsNetwork, snn: SnnNetwork, X, iterations, cfg: CalibConfig | None = None,
                    mode: str = "free", batch_size: int = 512) -> list[SweepRow]:
    """Ratio and MSE of every spiking layer for each iteration count.

    Iteration count 0 is the uncalibrated baseline.
    """
    base = cfg or CalibConfig()
    rows = []
    for it in iterations:
        c = CalibConfig(
            rho=base.rho, T=base.T, iterations=it, epsilon_fraction=base.epsilon_fraction,
            mode="shift" if it > 0 else "none", aggressive=base.aggressive,
        )
        for rep in layer_distribution(ann, snn, X, c, mode, batch_size=batch_size):
            rows.append(SweepRow(it, rep.layer, rep.ratio, rep.mse))
    return rows


def output_rows(rows: list[SweepRow]) -> list[SweepRow]:
    """Rows of the last spiking layer only."""
    last = max(r.layer for r in rows)
    return [r for r in rows if r.layer == last]


DISTRIBUTION_COLUMNS = ("layer", "psi", "count", "fraction")
METRICS_COLUMNS = ("layer", "iterations", "ratio", "mse")


def write_distribution_csv(reports: list[OffsetReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DISTRIBUTION_COLUMNS)
        for rep in reports:
            for psi, count in rep.histogram.items():
                w.writerow([rep.layer, psi, count, repr(count / rep.n)])


def write_metrics_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_COLUMNS)
        for r in rows:
            w.writerow([r.layer, r.iterations, repr(r.ratio), repr(r.mse)])
