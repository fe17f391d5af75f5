"""Integrate-and-fire layers with reset-by-subtraction.

The kernel works on arrays shaped ``(T, *shape)`` where the leading axis is
time and the trailing axes enumerate neurons (optionally with a batch axis in
front of the neuron axis). All potentials are float64.

Per step::

    m(t) = v(t-1) + I(t)
    s(t) = m(t) >= theta
    v(t) = m(t) - s(t) * theta
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, ShapeError


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _check_finite(a: np.ndarray, what: str, layer=None) -> None:
    if not np.all(np.isfinite(a)):
        where = f"layer {layer}: " if layer is not None else ""
        raise NonFiniteError(f"{where}non-finite values in {what}")


@dataclass(frozen=True)
class LayerParams:
    """Weights ``(out_dim, in_dim)``, scalar threshold and per-neuron v(0)."""

    weights: np.ndarray
    theta: float
    v0: np.ndarray
    name: str | int | None = field(default=None, compare=False)

    def __post_init__(self):
        w = _frozen(self.weights)
        v0 = _frozen(self.v0)
        if w.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {w.shape}", self.name)
        if v0.shape != (w.shape[0],):
            raise ShapeError(
                f"v0 has shape {v0.shape}, expected ({w.shape[0]},)", self.name
            )
        theta = float(self.theta)
        if not theta > 0 or not math.isfinite(theta):
            raise ValueError(f"theta must be positive and finite, got {self.theta}")
        _check_finite(w, "weights", self.name)
        _check_finite(v0, "v0", self.name)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "theta", theta)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    def with_v0(self, v0) -> "LayerParams":
        return LayerParams(self.weights, self.theta, v0, self.name)

    def __eq__(self, other):
        if not isinstance(other, LayerParams):
            return NotImplemented
        return (
            self.theta == other.theta
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.v0, other.v0)
        )

    __hash__ = None


@dataclass(frozen=True)
class InputCurrents:
    """Per-step input current, shape ``(T, *shape)``."""

    I: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.I)
        if arr.ndim < 2:
            raise ShapeError(f"currents must be at least 2-D (T, n), got {arr.shape}")
        _check_finite(arr, "input currents")
        object.__setattr__(self, "I", arr)

    @property
    def steps(self) -> int:
        return self.I.shape[0]

    def window(self, steps: int) -> "InputCurrents":
        if steps > self.steps:
            raise ShapeError(f"asked for {steps} steps but only {self.steps} recorded")
        return InputCurrents(self.I[:steps])


@dataclass(frozen=True)
class LayerTrace:
    """Pre-reset potential ``m``, post-reset potential ``v`` and spikes ``s``.

    All three are ``(T, *shape)``; ``v0`` is the starting potential, shape
    ``shape`` (or broadcastable to it).
    """

    m: np.ndarray
    v: np.ndarray
    s: np.ndarray
    theta: float
    v0: np.ndarray

    @property
    def steps(self) -> int:
        return self.s.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return self.s.sum(axis=0, dtype=np.int64)

    @property
    def v_final(self) -> np.ndarray:
        return self.v[-1]


def if_step(v_prev, I_t, theta: float, layer=None):
    """One IF update. Returns ``(s_t, v_t, m_t)``; ``s_t`` is boolean."""
    v_prev = np.asarray(v_prev, dtype=np.float64)
    I_t = np.asarray(I_t, dtype=np.float64)
    if v_prev.shape != I_t.shape:
        raise ShapeError(
            f"potential shape {v_prev.shape} != current shape {I_t.shape}", layer
        )
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    _check_finite(v_prev, "potential", layer)
    _check_finite(I_t, "input current", layer)
    m = v_prev + I_t
    s = m >= theta  # ties fire
    v = np.where(s, m - theta, m)
    return s, v, m


def _prepare(v0, currents, theta, layer):
    I = currents.I if isinstance(currents, InputCurrents) else np.asarray(currents, dtype=np.float64)
    if I.ndim < 2:
        raise ShapeError(f"currents must be (T, n...), got shape {I.shape}", layer)
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    _check_finite(I, "input currents", layer)
    v0 = np.asarray(v0, dtype=np.float64)
    try:
        v = np.broadcast_to(v0, I.shape[1:]).astype(np.float64, copy=True)
    except ValueError:
        raise ShapeError(
            f"v0 shape {v0.shape} does not match neuron shape {I.shape[1:]}", layer
        ) from None
    _check_finite(v, "v0", layer)
    return I, v


def simulate(v0, currents, theta: float, layer=None) -> LayerTrace:
    """Run the IF dynamics over every row of ``currents`` keeping full traces."""
    I, v = _prepare(v0, currents, theta, layer)
    T = I.shape[0]
    m_tr = np.empty_like(I)
    v_tr = np.empty_like(I)
    s_tr = np.empty(I.shape, dtype=bool)
    start = v.copy()
    for t in range(T):
        m = v + I[t]
        s = m >= theta
        v = np.where(s, m - theta, m)
        m_tr[t], v_tr[t], s_tr[t] = m, v, s
    return LayerTrace(m=m_tr, v=v_tr, s=s_tr, theta=float(theta), v0=start)


def run_spikes(v0, currents, theta: float, layer=None):
    """Streaming variant: spikes ``(T, *shape)`` and the final potential only."""
    I, v = _prepare(v0, currents, theta, layer)
    s_tr = np.empty(I.shape, dtype=bool)
    for t in range(I.shape[0]):
        m = v + I[t]
        s = m >= theta
        v = np.where(s, m - theta, m)
        s_tr[t] = s
    return s_tr, v


def run_layer(params: LayerParams, inputs: InputCurrents, T: int) -> LayerTrace:
    """Simulate one layer for exactly ``T`` steps of already-weighted input."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if inputs.steps != T:
        raise ShapeError(f"inputs have {inputs.steps} rows, expected T={T}", params.name)
    if inputs.I.shape[-1] != params.out_dim:
        raise ShapeError(
            f"current width {inputs.I.shape[-1]} != out_dim {params.out_dim}", params.name
        )
    return simulate(params.v0, inputs, params.theta, layer=params.name)


def average_psp(trace: LayerTrace) -> np.ndarray:
    """phi(T) = (sum_t s(t)) * theta / T, per neuron."""
    if trace.steps == 0:
        raise ValueError("empty trace")
    return trace.counts * trace.theta / trace.steps


def conservation_check(trace: LayerTrace, inputs: InputCurrents) -> np.ndarray:
    """Charge-conservation residual ``phi*T - sum I + (v(T) - v(0))`` per neuron.

    The four terms are combined with ``math.fsum`` so the residual only
    reflects rounding inside the simulation, not in the check itself.
    """
    I = inputs.I
    if I.shape != trace.v.shape:
        raise ShapeError(f"inputs {I.shape} vs trace {trace.v.shape}")
    released = trace.counts * trace.theta
    v0 = np.broadcast_to(trace.v0, trace.v.shape[1:])
    flatI = I.reshape(I.shape[0], -1)
    out = np.empty(flatI.shape[1])
    for j, (r, vt, vs, col) in enumerate(
        zip(released.ravel(), trace.v_final.ravel(), v0.ravel(), flatI.T)
    ):
        out[j] = math.fsum([r, vt, -vs, *(-col)])
    return out.reshape(trace.v.shape[1:])


def conservation_tolerance(T: int) -> float:
    return 64 * np.finfo(np.float64).eps * T


# Two mathematically equal ways of forming a layer's average input. They
# differ in floating point, which is what separates ANN and SNN inputs even
# when their rates agree.

def spike_currents(weights, spikes, theta_prev: float) -> np.ndarray:
    """Per-step currents ``W s(t) theta_prev`` for spike trains ``(T, ..., in)``."""
    return (np.asarray(spikes, dtype=np.float64) * theta_prev) @ np.asarray(weights).T


def averaged_current(weights, spikes, theta_prev: float) -> np.ndarray:
    """``W (sum_t s(t) theta_prev / T)``: the ANN-side average current."""
    s = np.asarray(spikes, dtype=np.float64)
    rate = s.sum(axis=0) * theta_prev / s.shape[0]
    return rate @ np.asarray(weights).T


def mean_spike_current(weights, spikes, theta_prev: float) -> np.ndarray:
    """``sum_t W s(t) theta_prev / T``: the SNN-side average current."""
    I = spike_currents(weights, spikes, theta_prev)
    return I.sum(axis=0) / I.shape[0]
