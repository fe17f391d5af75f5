"""QCFS (quantization clip-floor-shift) networks and a small STE trainer.

Layers carry no bias. Every layer except the last uses the QCFS activation;
by default the last layer is a plain linear classifier head.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OffsetSpikeError, ShapeError, TrainingDiverged

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QcfsLayer:
    weights: np.ndarray
    lam: float
    L: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("non-finite weights")
        if not float(self.lam) > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if int(self.L) < 1 or int(self.L) != self.L:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "L", int(self.L))

    def __eq__(self, other):
        if not isinstance(other, QcfsLayer):
            return NotImplemented
        return self.lam == other.lam and self.L == other.L and np.array_equal(
            self.weights, other.weights
        )

    __hash__ = None


@dataclass(frozen=True)
class QcfsNetwork:
    layers: tuple[QcfsLayer, ...]
    linear_head: bool = True
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].weights.shape[1] != layers[i - 1].weights.shape[0]:
                raise ShapeError(
                    f"in_dim {layers[i].weights.shape[1]} != previous out_dim "
                    f"{layers[i - 1].weights.shape[0]}",
                    i,
                )
        if len({layer.L for layer in layers}) != 1:
            raise ValueError("all layers must share one quantization step L")
        object.__setattr__(self, "layers", layers)

    @property
    def L(self) -> int:
        return self.layers[0].L

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def n_activated(self) -> int:
        """Number of layers that use the QCFS activation."""
        return len(self.layers) - 1 if self.linear_head else len(self.layers)


def qcfs_activation(z, lam: float, L: int) -> np.ndarray:
    """(lam/L) * clip(floor(z*L/lam + 1/2), 0, L)."""
    z = np.asarray(z, dtype=np.float64)
    k = np.clip(np.floor(z * L / lam + 0.5), 0, L)
    # k*lam/L, the same operation order as an SNN rate count*theta/T
    return k * lam / L


def qcfs_level(z, lam: float, L: int) -> np.ndarray:
    """Integer grid index k of ``qcfs_activation``."""
    z = np.asarray(z, dtype=np.float64)
    return np.clip(np.floor(z * L / lam + 0.5), 0, L).astype(np.int64)


def qcfs_level_from_total(total, lam: float, L: int, T: int) -> np.ndarray:
    """Grid index when the pre-activation is given as a T-step current total.

    With ``T == L`` the index is ``floor(total/lam + 1/2)`` with no division by
    ``T``, so an SNN neuron and its ANN twin see literally the same number.
    """
    total = np.asarray(total, dtype=np.float64)
    u = total / lam if T == L else total * L / (T * lam)
    return np.clip(np.floor(u + 0.5), 0, L).astype(np.int64)


def layer_forward(layer: QcfsLayer, a_prev, activate: bool = True) -> np.ndarray:
    z = np.asarray(a_prev, dtype=np.float64) @ layer.weights.T
    return qcfs_activation(z, layer.lam, layer.L) if activate else z


def ann_forward(net: QcfsNetwork, x):
    """Forward pass. Returns ``(activations, logits)``.

    ``activations`` lists the QCFS output of every activated layer. ``x`` may
    be one sample ``(in,)`` or a batch ``(B, in)``.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] != net.in_dim:
        raise ShapeError(f"input width {a.shape[-1]} != network in_dim {net.in_dim}", 0)
    acts = []
    for i, layer in enumerate(net.layers):
        if net.linear_head and i == len(net.layers) - 1:
            return acts, layer_forward(layer, a, activate=False)
        a = layer_forward(layer, a)
        acts.append(a)
    return acts, a


def predict(logits) -> np.ndarray:
    # argmax breaks ties toward the lowest class index
    return np.argmax(np.asarray(logits), axis=-1)


def init_network(sizes, L: int, seed: int, linear_head: bool = True, lam: float = 1.0):
    """Random network for layer widths ``sizes = [in, h1, ..., out]``."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append(QcfsLayer(w, lam, L))
    return QcfsNetwork(tuple(layers), linear_head=linear_head, seed=seed)


class BelowAccuracyFloor(OffsetSpikeError):
    pass


def _softmax_xent(logits, y):
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(len(y)), y].mean()
    grad = np.exp(logp)
    grad[np.arange(len(y)), y] -= 1.0
    return loss, grad / len(y)


def loss_and_grads(net: QcfsNetwork, X, y):
    """Cross-entropy loss with straight-through gradients for W and lambda.

    Inside ``[0, lam]`` the rounding is passed straight through; outside the
    gradient w.r.t. the pre-activation is zero. For lambda the gradient is 1
    above the clip, ``k/L - z/lam`` inside, 0 below.
    """
    X = np.asarray(X, dtype=np.float64)
    cache = []
    a = X
    n = len(net.layers)
    for i, layer in enumerate(net.layers):
        z = a @ layer.weights.T
        if net.linear_head and i == n - 1:
            cache.append((a, z, None))
            a = z
            break
        k = np.clip(np.floor(z * layer.L / layer.lam + 0.5), 0, layer.L)
        cache.append((a, z, k))
        a = k * layer.lam / layer.L
    loss, g = _softmax_xent(a, y)
    gW = [None] * n
    glam = [0.0] * n
    for i in range(n - 1, -1, -1):
        layer = net.layers[i]
        a_prev, z, k = cache[i]
        if k is not None:
            inside = (z >= 0) & (z <= layer.lam)
            dlam = np.where(z > layer.lam, 1.0, np.where(inside, k / layer.L - z / layer.lam, 0.0))
            glam[i] = float((g * dlam).sum())
            g = g * inside
        gW[i] = g.T @ a_prev
        g = g @ layer.weights
    return float(loss), gW, glam


def accuracy(net: QcfsNetwork, X, y) -> float:
    _, logits = ann_forward(net, X)
    return float(np.mean(predict(logits) == np.asarray(y)))


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    batch_size: int = 64
    seed: int = 0
    min_lam: float = 1e-3
    min_accuracy: float | None = None


def train_toy(net: QcfsNetwork, X, y, cfg: TrainConfig | None = None, **overrides) -> QcfsNetwork:
    """Adam on weights and lambdas with straight-through QCFS gradients."""
    cfg = replace(cfg or TrainConfig(), **overrides)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("empty dataset")
    n_out = net.layers[-1].weights.shape[0]
    if y.min() < 0 or y.max() >= n_out:
        raise ValueError(f"labels must lie in [0, {n_out})")
    if cfg.epochs == 0:
        return net

    rng = np.random.default_rng(cfg.seed)
    Ws = [layer.weights.copy() for layer in net.layers]
    lams = [layer.lam for layer in net.layers]
    params = Ws + [np.array(lams)]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    L = net.L
    cur = net
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, gW, glam = loss_and_grads(cur, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
            grads = gW + [np.array(glam)]
            step += 1
            for j, (p, gr) in enumerate(zip(params, grads)):
                m[j] = b1 * m[j] + (1 - b1) * gr
                v[j] = b2 * v[j] + (1 - b2) * gr * gr
                mhat = m[j] / (1 - b1**step)
                vhat = v[j] / (1 - b2**step)
                p -= cfg.lr * mhat / (np.sqrt(vhat) + eps)
            if not all(np.all(np.isfinite(p)) for p in params):
                raise TrainingDiverged(f"non-finite parameters after epoch {epoch}, step {step}")
            np.maximum(params[-1], cfg.min_lam, out=params[-1])
            cur = QcfsNetwork(
                tuple(QcfsLayer(w, lam, L) for w, lam in zip(Ws, params[-1])),
                linear_head=net.linear_head,
                seed=net.seed,
            )
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.4f", epoch, loss)
    if cfg.min_accuracy is not None:
        acc = accuracy(cur, X, y)
        if acc < cfg.min_accuracy:
            raise BelowAccuracyFloor(f"training accuracy {acc:.3f} < floor {cfg.min_accuracy}")
    return cur
