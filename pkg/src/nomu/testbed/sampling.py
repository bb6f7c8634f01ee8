"""Seeded training, validation and probe sets."""

from __future__ import annotations

import numpy as np

from ..data import Dataset
from ..rng import stream
from .functions import TestFunction


def sample_points(seed: int, n: int, d: int, label: str = "train") -> np.ndarray:
    """``n`` points i.i.d. uniform on ``[-1, 1]^d``; ``label`` selects the stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return stream(seed, "points", label, d).uniform(-1.0, 1.0, size=(n, d))


def make_dataset(f: TestFunction, seed: int, n: int, label: str = "train") -> Dataset:
    x = sample_points(seed, n, f.dim, label)
    return Dataset(x, f(x), {"function": f.key, "seed": seed, "label": label, "negate": f.negate})


def regression_sets(f: TestFunction, seed: int, n_train: int = 8,
                    n_val: int = 100) -> tuple[Dataset, Dataset]:
    """Training and validation draws from disjoint streams of the same seed."""
    return make_dataset(f, seed, n_train, "train"), make_dataset(f, seed, n_val, "validation")
