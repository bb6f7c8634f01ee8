"""The contract every uncertainty estimator satisfies, and the bounds built on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class UncertaintyEstimator(Protocol):
    """``predict(x)`` returns ``(mean, sigma)``, each of shape (n,), for x of shape (n, d)."""

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class UncertaintyBound:
    lower: np.ndarray
    upper: np.ndarray
    mean: np.ndarray
    sigma: np.ndarray
    c: float


def bounds_from(mean, sigma, c: float) -> UncertaintyBound:
    """``(mean - c*sigma, mean + c*sigma)``."""
    if c < 0:
        raise ValueError("calibration constant c must be >= 0")
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return UncertaintyBound(mean - c * sigma, mean + c * sigma, mean, sigma, float(c))


def predict_bounds(estimator: UncertaintyEstimator, x, c: float) -> UncertaintyBound:
    mean, sigma = estimator.predict(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return bounds_from(mean, sigma, c)


def as_inputs(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to shape (n, dim); a flat vector of length ``dim`` is one point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.shape[0] == dim else x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"inputs of shape {np.shape(x)} do not match dimension {dim}")
    return x
