"""QCFS network -> IF spiking network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ifcore import InputCurrents, LayerParams
from .qcfs import QcfsNetwork


@dataclass(frozen=True)
class SnnNetwork:
    layers: tuple[LayerParams, ...]
    L: int
    linear_head: bool = True
    seed: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def spiking_layers(self) -> tuple[LayerParams, ...]:
        return self.layers[:-1] if self.linear_head else self.layers

    @property
    def head(self) -> LayerParams | None:
        return self.layers[-1] if self.linear_head else None

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    def with_v0(self, v0s) -> "SnnNetwork":
        """Copy with new initial potentials for the spiking layers."""
        layers = list(self.layers)
        for i, v0 in enumerate(v0s):
            layers[i] = layers[i].with_v0(v0)
        return SnnNetwork(tuple(layers), self.L, self.linear_head, self.seed)


def convert(net: QcfsNetwork) -> SnnNetwork:
    """theta <- lambda, v(0) <- theta/2, weights copied bit for bit."""
    layers = tuple(
        LayerParams(
            weights=layer.weights,
            theta=layer.lam,
            v0=np.full(layer.weights.shape[0], layer.lam / 2),
            name=i,
        )
        for i, layer in enumerate(net.layers)
    )
    return SnnNetwork(layers, L=net.L, linear_head=net.linear_head, seed=net.seed)


def encode_input(x, T: int) -> InputCurrents:
    """Present the analog input as the same row on every one of ``T`` steps."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    x = np.asarray(x, dtype=np.float64)
    return InputCurrents(np.broadcast_to(x, (T, *x.shape)))
