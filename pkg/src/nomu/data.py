"""Labelled point sets on a box domain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned input domain, ``[-1, 1]^d`` unless stated otherwise."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def unit(cls, dim: int) -> "Box":
        return cls(-np.ones(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.atleast_2d(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_dict(self) -> dict:
        return {"lower": np.asarray(self.lower).tolist(), "upper": np.asarray(self.upper).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(np.array(d["lower"], dtype=float), np.array(d["upper"], dtype=float))


@dataclass
class Dataset:
    """Inputs ``x`` of shape (n, d) with scalar targets ``y`` of shape (n,)."""

    x: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.x.shape[0]} inputs but {self.y.shape[0]} targets")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def subset(self, index) -> "Dataset":
        return Dataset(self.x[index], self.y[index], dict(self.provenance))

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(np.array(d["x"], dtype=float), np.array(d["y"], dtype=float), d.get("provenance", {}))


TrainingSet = Dataset
