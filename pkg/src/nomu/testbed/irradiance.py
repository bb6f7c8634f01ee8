"""Solar-irradiance series: CSV ingestion and the interval-based split."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data import Dataset
from ..rng import stream

N_TRAIN = 194
N_VALIDATION = 197


class IrradianceConfigError(ValueError):
    """The requested split cannot be realised on this file."""


def read_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Two numeric columns (year, irradiance); a non-numeric first row is a header."""
    years, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) < 2:
                    raise ValueError
                a, b = float(row[0]), float(row[1])
            except ValueError:
                if lineno == 1 and not years:
                    continue  # header
                raise ValueError(f"{path}: malformed row at line {lineno}: {row!r}") from None
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ValueError(f"{path}: non-finite value at line {lineno}")
            years.append(a)
            values.append(b)
    return np.array(years), np.array(values)


def load_irradiance(path: str | Path, intervals: Sequence[tuple[float, float]], seed: int = 0,
                    n_train: int = N_TRAIN, n_validation: int = N_VALIDATION,
                    rescale_targets: bool = True) -> tuple[Dataset, Dataset]:
    """Split the series into training and validation sets.

    ``intervals`` are validation-only ranges in the file's year units.  Inputs
    are rescaled to ``[-1, 1]``; with ``rescale_targets`` the targets are too.
    Points inside an interval go to validation; the rest of the validation
    quota is drawn from the remaining points by a seeded shuffle.
    """
    years, values = read_csv(path)
    if len(years) != n_train + n_validation:
        raise IrradianceConfigError(
            f"file has {len(years)} points, split needs {n_train} + {n_validation}")
    inside = np.zeros(len(years), dtype=bool)
    for lo, hi in intervals:
        if lo > hi:
            raise IrradianceConfigError(f"interval ({lo}, {hi}) is reversed")
        inside |= (years >= lo) & (years <= hi)
    n_inside = int(inside.sum())
    if n_inside > n_validation:
        raise IrradianceConfigError(
            f"{n_inside} points fall in validation intervals, more than the {n_validation} allowed")
    rest = np.flatnonzero(~inside)
    extra = stream(seed, "irradiance-split").permutation(rest)[: n_validation - n_inside]
    is_val = inside.copy()
    is_val[extra] = True

    x = 2.0 * (years - years.min()) / (years.max() - years.min()) - 1.0
    y = values
    if rescale_targets:
        y = 2.0 * (values - values.min()) / (values.max() - values.min()) - 1.0
    prov = {"source": str(path), "seed": seed}
    train = Dataset(x[~is_val, None], y[~is_val], dict(prov, label="train"))
    val = Dataset(x[is_val, None], y[is_val], dict(prov, label="validation"))
    return train, val
