"""Offset-spike judgment and initial-potential shifting.

A converted layer is first probed for ``rho`` steps. The residual potential
tells us whether each neuron fired too often or too rarely relative to its
QCFS twin; the neuron's v(0) is then shifted so that re-running the same
window yields exactly one spike less (or more). Repeating the probe/shift
cycle removes larger offsets one spike at a time.

Throughout, "v(t)" in the shift formulas is the POST-reset potential. At a
spike step the pre-reset potential is ``m(t) = v(t) + theta``; reading v(t)
as the pre-reset value breaks the +-1 guarantee.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .convert import SnnNetwork
from .errors import CalibrationError
from .ifcore import InputCurrents, LayerParams, run_spikes, simulate, spike_currents
from .qcfs import predict

log = logging.getLogger(__name__)

MODES = ("shift", "lightweight", "none")


class Sign(enum.IntEnum):
    NEGATIVE = -1
    UNKNOWN = 0
    POSITIVE = 1


@dataclass(frozen=True)
class OffsetJudgment:
    neuron: int
    sign: Sign
    exact_k: int | None
    phi: float
    v_final: float

    def __post_init__(self):
        if self.exact_k is not None and int(np.sign(self.exact_k)) != int(self.sign):
            raise ValueError(f"exact_k={self.exact_k} inconsistent with sign {self.sign!r}")


@dataclass(frozen=True)
class ShiftRecord:
    layer: int
    epoch: int
    neuron: int
    judgment: int
    direction: str  # "up", "down" or "skip"
    distance: float
    sample: int | None = None

    def as_dict(self) -> dict:
        d = {
            "layer": self.layer,
            "epoch": self.epoch,
            "neuron": self.neuron,
            "judgment": self.judgment,
            "shift_direction": self.direction,
            "distance": self.distance,
        }
        if self.sample is not None:
            d["sample"] = self.sample
        return d


@dataclass
class CalibrationPlan:
    epsilon: float
    theta: float
    records: list[ShiftRecord] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.epsilon < self.theta:
            raise ValueError(f"epsilon must lie in (0, theta={self.theta}), got {self.epsilon}")

    def for_neuron(self, neuron: int, sample: int | None = None) -> list[tuple[int, str, float]]:
        return [
            (r.epoch, r.direction, r.distance)
            for r in self.records
            if r.neuron == neuron and r.sample == sample and r.direction != "skip"
        ]


@dataclass(frozen=True)
class CalibConfig:
    """Probe length ``rho``, inference length ``T``, shift epochs ``iterations``.

    ``rho`` and ``T`` default to the network's quantization step L.
    """

    rho: int | None = None
    T: int | None = None
    iterations: int = 1
    epsilon_fraction: float = 0.5
    mode: str = "shift"
    aggressive: bool = False
    persist: bool = False

    def __post_init__(self):
        if self.rho is not None and self.rho < 1:
            raise ValueError("rho must be >= 1")
        if self.T is not None and self.T < 1:
            raise ValueError("T must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0 < self.epsilon_fraction < 1:
            raise ValueError("epsilon_fraction must lie in (0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    def resolve(self, L: int) -> "CalibConfig":
        return CalibConfig(
            rho=self.rho or L,
            T=self.T or L,
            iterations=self.iterations,
            epsilon_fraction=self.epsilon_fraction,
            mode=self.mode,
            aggressive=self.aggressive,
            persist=self.persist,
        )

    def total_steps(self, L: int) -> int:
        c = self.resolve(L)
        if c.mode == "shift":
            return c.T + c.rho * c.iterations
        if c.mode == "lightweight":
            return c.T + c.rho
        return c.T


# ---------------------------------------------------------------- judgments


def _sign_array(phi, v_rel, theta):
    phi = np.asarray(phi, dtype=np.float64)
    v_rel = np.asarray(v_rel, dtype=np.float64)
    neg = (phi > 0) & (v_rel < 0)
    pos = (phi < theta) & (v_rel >= theta)
    return np.where(neg, -1, np.where(pos, 1, 0)).astype(np.int64)


def judge_sign(phi, v_final, theta: float, v0=None):
    """Sign of the offset spike from the residual potential.

    Negative when phi > 0 and v(T) < 0 (over-fired); positive when
    phi < theta and v(T) >= theta (under-fired); unknown otherwise. With a
    shifted start ``v0`` the residual is measured relative to ``v0 - theta/2``.
    Scalars give a :class:`Sign`, arrays an int array.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    v_rel = np.asarray(v_final, dtype=np.float64)
    if v0 is not None:
        v_rel = v_rel - (np.asarray(v0, dtype=np.float64) - theta / 2)
    out = _sign_array(phi, v_rel, theta)
    return Sign(int(out)) if out.ndim == 0 else out


def in_exact_range(sum_I, theta: float, T: int):
    sum_I = np.asarray(sum_I, dtype=np.float64)
    return (sum_I >= -theta / 2) & (sum_I < theta * T + theta / 2)


def judge_exact(phi, v_final, theta: float, sum_I, T: int, v0=None):
    """Exact offset spike psi from the residual potential (requires L == T).

    In range, ``psi = floor(v(T) / theta)`` for the baseline start
    ``v0 = theta/2``; a shifted start is accounted for by measuring v(T)
    against ``v0 - theta/2``. Out of range, the QCFS twin saturates at 0 or
    theta and psi follows from the spike count directly.
    """
    phi = np.asarray(phi, dtype=np.float64)
    v = np.asarray(v_final, dtype=np.float64)
    if v0 is not None:
        offset = np.asarray(v0, dtype=np.float64) - theta / 2
        v = np.where(offset == 0, v, v - offset)
    sum_I = np.asarray(sum_I, dtype=np.float64)
    n = np.rint(phi * T / theta).astype(np.int64)
    k_in = np.floor(v / theta).astype(np.int64)
    k_low = -n
    k_high = T - n
    out = np.where(in_exact_range(sum_I, theta, T), k_in, np.where(sum_I < -theta / 2, k_low, k_high))
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- shifts


def _down(v, s, theta, epsilon):
    minv = np.where(s, v, np.inf).min(axis=0)
    return np.maximum(theta, minv + epsilon)


def _up(v, s, theta, epsilon):
    maxv = np.where(s, -np.inf, v).max(axis=0)
    return np.maximum(theta, theta + epsilon - maxv)


def _check_eps(theta, epsilon):
    if not 0 < epsilon < theta:
        raise ValueError(f"epsilon must lie in (0, theta={theta}), got {epsilon}")


def shift_down_distance(v, s, theta: float, epsilon: float):
    """max(theta, min{v(t) : s(t)=1} + epsilon) over the window (axis 0).

    Lowering v(0) by this amount removes exactly one spike from the window.
    """
    _check_eps(theta, epsilon)
    v = np.asarray(v, dtype=np.float64)
    s = np.asarray(s, dtype=bool)
    if not np.all(s.any(axis=0)):
        raise CalibrationError("cannot shift down: no spike in the window")
    d = _down(v, s, theta, epsilon)
    return float(d) if d.ndim == 0 else d


def shift_up_distance(v, s, theta: float, epsilon: float):
    """max(theta, theta + epsilon - max{v(t) : s(t)=0}) over the window.

    Raising v(0) by this amount adds exactly one spike to the window.
    """
    _check_eps(theta, epsilon)
    v = np.asarray(v, dtype=np.float64)
    s = np.asarray(s, dtype=bool)
    if np.any(s.all(axis=0)):
        raise CalibrationError("cannot shift up: the neuron spiked on every step")
    d = _up(v, s, theta, epsilon)
    return float(d) if d.ndim == 0 else d


# ---------------------------------------------------------------- layer


@dataclass
class LayerDiagnostics:
    layer: int | None
    epochs: int = 0
    judged_negative: list[int] = field(default_factory=list)
    judged_positive: list[int] = field(default_factory=list)
    skipped: int = 0
    exact_guard_failures: int = 0  # neurons whose input total fell outside the exact range
    sign_fallback: bool = False
    initial_judgment: np.ndarray | None = None
    plan: CalibrationPlan | None = None


def _neuron_index(shape, flat_index):
    """(sample, neuron) for batched neuron arrays, (None, neuron) otherwise."""
    if len(shape) == 1:
        return None, int(flat_index)
    b, i = np.unravel_index(flat_index, (int(np.prod(shape[:-1])), shape[-1]))
    return int(b), int(i)


def calibrate_layer(
    layer: LayerParams,
    layer_input: InputCurrents,
    cfg: CalibConfig,
    L: int | None = None,
    v0=None,
    record: bool = False,
):
    """Shift the initial potentials of one layer; returns ``(v0, diagnostics)``.

    ``layer_input`` holds already-weighted currents ``(steps, ..., out_dim)``
    with at least ``rho`` rows; the first ``rho`` are the probe window, reused
    unchanged in every epoch. Each epoch restarts the window from the current
    v(0). When ``rho == L`` the offset is read exactly from the residual
    potential; otherwise only its sign is used.
    """
    L = L or cfg.rho
    cfg = cfg.resolve(L)
    rho, theta = cfg.rho, layer.theta
    eps = cfg.epsilon_fraction * theta
    I = layer_input.window(rho).I
    shape = I.shape[1:]
    v0 = np.broadcast_to(layer.v0 if v0 is None else v0, shape).astype(np.float64, copy=True)
    sum_I = I.sum(axis=0)
    exact = rho == L
    diag = LayerDiagnostics(layer=layer.name, sign_fallback=not exact, plan=CalibrationPlan(eps, theta))
    if exact:
        diag.exact_guard_failures = int(np.count_nonzero(~in_exact_range(sum_I, theta, rho)))

    for epoch in range(1, cfg.iterations + 1):
        tr = simulate(v0, I, theta, layer=layer.name)
        phi = tr.counts * theta / rho
        if exact:
            k = judge_exact(phi, tr.v_final, theta, sum_I, rho, v0=v0)
        else:
            k = judge_sign(phi, tr.v_final, theta, v0=v0)
        k = np.asarray(k)
        if epoch == 1:
            diag.initial_judgment = k.copy()
        diag.epochs = epoch
        diag.judged_negative.append(int(np.count_nonzero(k < 0)))
        diag.judged_positive.append(int(np.count_nonzero(k > 0)))
        if not k.any():
            break

        reps = np.abs(k) if cfg.aggressive else np.minimum(np.abs(k), 1)
        for r in range(int(reps.max())):
            if r > 0:
                tr = simulate(v0, I, theta, layer=layer.name)
            active = reps > r
            any_spike = tr.s.any(axis=0)
            all_spike = tr.s.all(axis=0)
            down = active & (k < 0)
            up = active & (k > 0)
            bad = (down & ~any_spike) | (up & all_spike)
            down &= any_spike
            up &= ~all_spike
            d_down = _down(tr.v, tr.s, theta, eps)
            d_up = _up(tr.v, tr.s, theta, eps)
            if bad.any():
                diag.skipped += int(np.count_nonzero(bad))
                log.info("layer %s epoch %d: %d impossible shifts skipped", layer.name, epoch, int(bad.sum()))
            if record:
                for j in np.flatnonzero(down | up | bad):
                    sample, neuron = _neuron_index(shape, j)
                    direction = "skip" if bad.flat[j] else ("down" if down.flat[j] else "up")
                    dist = 0.0 if direction == "skip" else float((d_down if direction == "down" else d_up).flat[j])
                    diag.plan.records.append(
                        ShiftRecord(layer.name, epoch, neuron, int(k.flat[j]), direction, dist, sample)
                    )
            v0 = np.where(down, v0 - d_down, np.where(up, v0 + d_up, v0))
    return v0, diag


# ---------------------------------------------------------------- network


@dataclass
class NetworkRun:
    """Outcome of one (possibly calibrated) SNN inference over ``T`` steps."""

    v0: list[np.ndarray]
    counts: list[np.ndarray]  # spike counts over the T-step window, per spiking layer
    input_totals: list[np.ndarray]  # summed input current over the T-step window
    logits: np.ndarray
    T: int
    total_steps: int
    diagnostics: list[LayerDiagnostics | None] = field(default_factory=list)

    @property
    def records(self) -> list[ShiftRecord]:
        out = []
        for d in self.diagnostics:
            if d is not None and d.plan is not None:
                out.extend(d.plan.records)
        return out


def _layer_currents(layer: LayerParams, spikes, theta_prev):
    return spike_currents(layer.weights, spikes, theta_prev)


def calibrate_network(
    snn: SnnNetwork,
    x,
    cfg: CalibConfig | None = None,
    record: bool = False,
    v0s=None,
) -> NetworkRun:
    """Layer-by-layer calibration followed by T-step inference.

    ``x`` is one input vector or a batch ``(B, in)``; each sample is
    calibrated independently. Every layer is calibrated against the spike
    trains actually produced by the already-calibrated layer below it.
    """
    cfg = (cfg or CalibConfig()).resolve(snn.L)
    x = np.asarray(x, dtype=np.float64)
    T, rho = cfg.T, cfg.rho
    calibrating = cfg.mode == "lightweight" or (cfg.mode == "shift" and cfg.iterations > 0)
    steps = max(T, rho) if calibrating else T

    first = snn.layers[0]
    I = np.broadcast_to(x @ first.weights.T, (steps, *x.shape[:-1], first.out_dim))
    run = NetworkRun([], [], [], None, T, cfg.total_steps(snn.L))
    spikes = None
    for idx, layer in enumerate(snn.spiking_layers):
        if idx > 0:
            I = _layer_currents(layer, spikes, snn.layers[idx - 1].theta)
        start = layer.v0 if v0s is None else v0s[idx]
        start = np.broadcast_to(start, I.shape[1:]).astype(np.float64, copy=True)
        diag = None
        if cfg.mode == "shift" and cfg.iterations > 0:
            start, diag = calibrate_layer(layer, InputCurrents(I), cfg, L=snn.L, v0=start, record=record)
        elif cfg.mode == "lightweight":
            _, v_rho = run_spikes(start, I[:rho], layer.theta, layer=layer.name)
            start = v_rho
        spikes, _ = run_spikes(start, I, layer.theta, layer=layer.name)
        run.v0.append(start)
        run.counts.append(spikes[:T].sum(axis=0, dtype=np.int64))
        run.input_totals.append(I[:T].sum(axis=0))
        run.diagnostics.append(diag)

    last_theta = snn.spiking_layers[-1].theta if snn.spiking_layers else None
    if snn.linear_head:
        head = snn.head
        if spikes is None:
            run.logits = x @ head.weights.T
        else:
            run.logits = _layer_currents(head, spikes[:T], last_theta).sum(axis=0) / T
    else:
        run.logits = run.counts[-1] * last_theta / T
    return run


def lightweight_calibrate(snn: SnnNetwork, sample, rho: int, T: int) -> np.ndarray:
    """v(0) <- v(rho) per layer, then T-step inference; returns logits."""
    cfg = CalibConfig(rho=rho, T=T, iterations=0, mode="lightweight")
    return calibrate_network(snn, sample, cfg).logits


# ---------------------------------------------------------------- evaluation


@dataclass
class EvalResult:
    accuracy: float
    predictions: np.ndarray
    logits: np.ndarray
    T: int
    total_steps: int
    records: list[ShiftRecord]


def _chunks(n, size):
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def evaluate(
    snn: SnnNetwork,
    X,
    y,
    cfg: CalibConfig | None = None,
    batch_size: int = 256,
    threads: int = 1,
    record: bool = False,
) -> EvalResult:
    """Classify every sample with per-sample calibration.

    With ``cfg.persist`` the calibrated potentials of one sample seed the
    next, so samples are processed one at a time in order.
    """
    cfg = (cfg or CalibConfig()).resolve(snn.L)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    records: list[ShiftRecord] = []
    if cfg.persist:
        v0s = None
        outs = []
        for i, x in enumerate(X):
            r = calibrate_network(snn, x, cfg, record=record, v0s=v0s)
            v0s = r.v0
            outs.append(r.logits)
            records.extend(_with_sample(r.records, i))
        logits = np.stack(outs)
    else:
        spans = _chunks(len(X), batch_size)

        def work(span):
            return calibrate_network(snn, X[span[0] : span[1]], cfg, record=record)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                runs = list(pool.map(work, spans))
        else:
            runs = [work(s) for s in spans]
        logits = np.concatenate([r.logits for r in runs])
        for (lo, _), r in zip(spans, runs):
            records.extend(_with_sample(r.records, None, offset=lo))
    pred = predict(logits)
    return EvalResult(
        accuracy=float(np.mean(pred == y)) if len(y) else float("nan"),
        predictions=pred,
        logits=logits,
        T=cfg.T,
        total_steps=cfg.total_steps(snn.L),
        records=records,
    )


def _with_sample(records, sample, offset=0):
    out = []
    for r in records:
        s = sample if sample is not None else (r.sample + offset if r.sample is not None else offset)
        out.append(ShiftRecord(r.layer, r.epoch, r.neuron, r.judgment, r.direction, r.distance, s))
    return out
