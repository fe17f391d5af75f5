"""Synthetic toy datasets and a CSV ingestion hook."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = ""
    seed: int | None = None

    def __len__(self):
        return len(self.y)

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1

    def split(self, test_fraction: float = 0.25, seed: int = 0):
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self))
        n_test = int(round(len(self) * test_fraction))
        te, tr = order[:n_test], order[n_test:]
        return (
            Dataset(self.X[tr], self.y[tr], self.name, self.seed),
            Dataset(self.X[te], self.y[te], self.name, self.seed),
        )


def make_blobs(n=600, n_classes=2, dim=2, seed=0, radius=1.0, spread=0.15) -> Dataset:
    """Gaussian blobs with centers spaced on a sphere of ``radius``.

    Centers sit away from the origin so bias-free networks can separate them.
    """
    rng = np.random.default_rng(seed)
    if dim == 2:
        ang = 2 * np.pi * (np.arange(n_classes) + 0.5) / n_classes
        centers = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        c = rng.normal(size=(n_classes, dim))
        centers = radius * c / np.linalg.norm(c, axis=1, keepdims=True)
    y = rng.integers(0, n_classes, size=n)
    X = centers[y] + spread * rng.normal(size=(n, dim))
    return Dataset(X, y, f"blobs{n_classes}x{dim}", seed)


def make_xor(n=600, seed=0, noise=0.15) -> Dataset:
    """XOR corners at (+-1, +-1); label 1 when the coordinates differ in sign."""
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(n, 2))
    y = (signs[:, 0] != signs[:, 1]).astype(np.int64)
    X = signs + noise * rng.normal(size=(n, 2))
    return Dataset(X, y, "xor", seed)


def load_csv(path) -> Dataset:
    """Numeric CSV, one sample per row, integer label in the last column.

    A header row is skipped if its first cell does not parse as a number.
    """
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if i == 0:
                try:
                    float(row[0])
                except ValueError:
                    continue
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows, dtype=np.float64)
    y = arr[:, -1]
    if not np.all(y == np.round(y)) or y.min() < 0:
        raise ValueError(f"{path}: last column must hold non-negative integer labels")
    return Dataset(arr[:, :-1], y.astype(np.int64), Path(path).stem, None)


def make_dataset(name: str, n: int = 600, seed: int = 0, **kw) -> Dataset:
    """Build a dataset from a short spec.

    ``blobs``, ``blobs:C``, ``blobs:C:D``, ``blobs:C:D:spread``, ``xor`` or a
    CSV path.
    """
    if name == "xor":
        return make_xor(n=n, seed=seed, **kw)
    if name.startswith("blobs"):
        parts = name.split(":")
        n_classes = int(parts[1]) if len(parts) > 1 else 2
        dim = int(parts[2]) if len(parts) > 2 else 2
        if len(parts) > 3:
            kw.setdefault("spread", float(parts[3]))
        return make_blobs(n=n, n_classes=n_classes, dim=dim, seed=seed, **kw)
    if Path(name).suffix == ".csv":
        return load_csv(name)
    raise ValueError(f"unknown dataset {name!r}")
