"""Synthetic datasets: seeded Gaussian blobs in the unit hypercube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import rng_gauss, rng_uniform


@dataclass
class Dataset:
    """Parallel (inputs, labels) arrays; inputs live in [0,1]^dim."""

    inputs: np.ndarray  # (n, dim) float64
    labels: np.ndarray  # (n,) int64
    n_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.labels):
            raise ParameterError("inputs and labels must be parallel 2-D/1-D arrays")
        if self.n_classes < 1:
            raise ParameterError("n_classes must be positive")
        if len(self.labels) and int(self.labels.max()) >= self.n_classes:
            raise ParameterError("label out of range for n_classes")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes)


def split_per_class(data: Dataset, train_per_class: int) -> tuple[Dataset, Dataset]:
    """Split a class-major dataset into (train, held-out) with the first
    ``train_per_class`` rows of every class going to train. Both halves keep
    the class-major ordering, so the split is deterministic."""
    per = len(data) // data.n_classes
    if not 0 < train_per_class < per:
        raise ParameterError(f"train_per_class must be in (0, {per})")
    train_idx, held_idx = [], []
    for c in range(data.n_classes):
        base = c * per
        train_idx.extend(range(base, base + train_per_class))
        held_idx.extend(range(base + train_per_class, base + per))
    return data.subset(train_idx), data.subset(held_idx)


@dataclass(frozen=True)
class BlobRecipe:
    """Everything needed to regenerate a blob dataset from scratch — the
    published data recipe a verifier retrains from."""

    n_classes: int
    n_per_class: int
    dim: int
    spread: float
    seed: int

    def build(self) -> Dataset:
        return make_blobs(self.n_classes, self.n_per_class, self.dim,
                          self.spread, self.seed)

    def canonical_bytes(self) -> bytes:
        from . import canon
        return (canon.u32(self.n_classes) + canon.u32(self.n_per_class)
                + canon.u32(self.dim) + canon.f64(self.spread)
                + canon.u64(self.seed))


def make_blobs(n_classes: int, n_per_class: int, dim: int, spread: float,
               seed: int) -> Dataset:
    """Isotropic Gaussian blobs, one cluster per class.

    Class centers are drawn uniformly in [0.2, 0.8]^dim; each point is its
    center plus N(0, spread) per coordinate, clamped back into [0, 1]. The
    draw order (centers by class then coordinate, points by class, sample,
    coordinate) is fixed, so the dataset is a pure function of the seed.
    """
    if n_classes < 2:
        raise ParameterError("n_classes must be >= 2")
    if dim < 2:
        raise ParameterError("dim must be >= 2")
    if spread <= 0:
        raise ParameterError("spread must be > 0")
    if n_per_class < 1:
        raise ParameterError("n_per_class must be >= 1")

    state = seed
    centers = np.empty((n_classes, dim))
    for c in range(n_classes):
        for d in range(dim):
            u, state = rng_uniform(state)
            centers[c, d] = 0.2 + 0.6 * u

    n = n_classes * n_per_class
    inputs = np.empty((n, dim))
    labels = np.empty(n, dtype=np.int64)
    row = 0
    for c in range(n_classes):
        for _ in range(n_per_class):
            for d in range(dim):
                g, state = rng_gauss(state)
                inputs[row, d] = min(1.0, max(0.0, centers[c, d] + spread * g))
            labels[row] = c
            row += 1
    return Dataset(inputs, labels, n_classes)
