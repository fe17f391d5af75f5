"""Reproducible toy setups shared by the acceptance suite and scripts/."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .convert import SnnNetwork, convert
from .data import Dataset, make_blobs
from .qcfs import QcfsNetwork, accuracy, init_network, train_toy

# Three hidden layers: with two, layer 1 sees a constant input and is exact,
# so constrained and free distributions coincide.
TOY_SIZES = (2, 32, 32, 32, 4)
SHALLOW_SIZES = (2, 32, 32, 4)


@dataclass(frozen=True)
class ToySetup:
    sizes: tuple[int, ...] = TOY_SIZES
    seed: int = 0
    L: int = 4
    n: int = 3000
    n_classes: int = 4
    spread: float = 0.3
    test_fraction: float = 0.5
    epochs: int = 100
    lr: float = 0.01


@dataclass(frozen=True)
class ToyModel:
    setup: ToySetup
    ann: QcfsNetwork
    snn: SnnNetwork
    train: Dataset
    test: Dataset

    @property
    def train_accuracy(self) -> float:
        return accuracy(self.ann, self.train.X, self.train.y)

    @property
    def test_accuracy(self) -> float:
        return accuracy(self.ann, self.test.X, self.test.y)


@lru_cache(maxsize=16)
def build(setup: ToySetup = ToySetup()) -> ToyModel:
    """Generate data, train the QCFS MLP and convert it; cached per setup."""
    ds = make_blobs(n=setup.n, n_classes=setup.n_classes, dim=setup.sizes[0],
                    seed=setup.seed, spread=setup.spread)
    train, test = ds.split(setup.test_fraction, seed=setup.seed)
    net = init_network(list(setup.sizes), L=setup.L, seed=setup.seed)
    net = train_toy(net, train.X, train.y, epochs=setup.epochs, lr=setup.lr, seed=setup.seed)
    return ToyModel(setup, net, convert(net), train, test)


def toy_mlp(seed: int = 0, sizes=TOY_SIZES, **kw) -> ToyModel:
    return build(ToySetup(sizes=tuple(sizes), seed=seed, **kw))
