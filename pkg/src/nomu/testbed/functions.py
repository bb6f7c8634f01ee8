"""Synthetic test functions on ``[-1, 1]^d`` with outputs rescaled to ``[-1, 1]``.

Library functions use their standard formulas on their usual native domains;
inputs in ``[-1, 1]^d`` are mapped affinely onto that domain.  Outputs are then
mapped by ``(raw - mid) / half`` with constants frozen in ``constants.json``.

The hand-made 1D shapes have no library definition; the forms used here are:

    Abs     |x|
    Step    +1 for x < 0, -1 for x >= 0
    Kink    0.3 x + 2 max(0, x - 0.25)
    Square  x^2
    Cubic   x^3
    Sine1   sin(2 pi x)
    Sine2   sin(2 pi x) + 0.5 sin(6 pi x)
    Sine3   sin(2 pi x) + 2 x          (oscillation on a linear trend)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

CONSTANTS_PATH = Path(__file__).with_name("constants.json")


# ---- native formulas (rows of x are points, columns coordinates) ---------

def _abs(x):
    return np.abs(x[:, 0])


def _step(x):
    return np.where(x[:, 0] < 0.0, 1.0, -1.0)


def _kink(x):
    return 0.3 * x[:, 0] + 2.0 * np.maximum(0.0, x[:, 0] - 0.25)


def _square(x):
    return x[:, 0] ** 2


def _cubic(x):
    return x[:, 0] ** 3


def _sine1(x):
    return np.sin(2 * np.pi * x[:, 0])


def _sine2(x):
    return np.sin(2 * np.pi * x[:, 0]) + 0.5 * np.sin(6 * np.pi * x[:, 0])


def _sine3(x):
    return np.sin(2 * np.pi * x[:, 0]) + 2.0 * x[:, 0]


def _forrester(x):
    return (6 * x[:, 0] - 2) ** 2 * np.sin(12 * x[:, 0] - 4)


def _levy(x):
    w = 1.0 + (x - 1.0) / 4.0
    out = np.sin(np.pi * w[:, 0]) ** 2
    out = out + np.sum((w[:, :-1] - 1) ** 2 * (1 + 10 * np.sin(np.pi * w[:, :-1] + 1) ** 2), axis=1)
    return out + (w[:, -1] - 1) ** 2 * (1 + np.sin(2 * np.pi * w[:, -1]) ** 2)


def _sphere(x):
    return np.sum(x * x, axis=1)


def _gfunction(x):
    a = (np.arange(1, x.shape[1] + 1) - 2.0) / 2.0
    return np.prod((np.abs(4 * x - 2) + a) / (1 + a), axis=1)


def _goldstein_price(x):
    x1, x2 = x[:, 0], x[:, 1]
    t1 = 1 + (x1 + x2 + 1) ** 2 * (19 - 14 * x1 + 3 * x1**2 - 14 * x2 + 6 * x1 * x2 + 3 * x2**2)
    t2 = 30 + (2 * x1 - 3 * x2) ** 2 * (18 - 32 * x1 + 12 * x1**2 + 48 * x2 - 36 * x1 * x2 + 27 * x2**2)
    return t1 * t2


def _bukin6(x):
    x1, x2 = x[:, 0], x[:, 1]
    return 100 * np.sqrt(np.abs(x2 - 0.01 * x1**2)) + 0.01 * np.abs(x1 + 10)


def _rosenbrock(x):
    return np.sum(100 * (x[:, 1:] - x[:, :-1] ** 2) ** 2 + (x[:, :-1] - 1) ** 2, axis=1)


def _beale(x):
    x1, x2 = x[:, 0], x[:, 1]
    return ((1.5 - x1 + x1 * x2) ** 2 + (2.25 - x1 + x1 * x2**2) ** 2
            + (2.625 - x1 + x1 * x2**3) ** 2)


def _camel(x):
    x1, x2 = x[:, 0], x[:, 1]
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def _perm(x, beta: float = 0.5):
    d = x.shape[1]
    j = np.arange(1, d + 1, dtype=float)
    out = np.zeros(x.shape[0])
    for i in range(1, d + 1):
        inner = np.sum((j**i + beta) * ((x / j) ** i - 1.0), axis=1)
        out += inner**2
    return out


def _branin(x):
    x1, x2 = x[:, 0], x[:, 1]
    b, c, r, s, t = 5.1 / (4 * np.pi**2), 5 / np.pi, 6.0, 10.0, 1 / (8 * np.pi)
    return (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


def _styblinski_tang(x):
    return 0.5 * np.sum(x**4 - 16 * x**2 + 5 * x, axis=1)


@dataclass(frozen=True)
class _Native:
    formula: Callable[[np.ndarray], np.ndarray]
    lower: tuple | Callable[[int], tuple]
    upper: tuple | Callable[[int], tuple]
    argmin: Callable[[int], np.ndarray] | None = None  # native minimiser, if known


def _box(lo, hi):
    return (lambda d: (lo,) * d), (lambda d: (hi,) * d)


def _levy_box():
    return _box(-10.0, 10.0)


NATIVE: dict[str, _Native] = {
    "Abs": _Native(_abs, *_box(-1.0, 1.0)),
    "Step": _Native(_step, *_box(-1.0, 1.0)),
    "Kink": _Native(_kink, *_box(-1.0, 1.0)),
    "Square": _Native(_square, *_box(-1.0, 1.0)),
    "Cubic": _Native(_cubic, *_box(-1.0, 1.0)),
    "Sine1": _Native(_sine1, *_box(-1.0, 1.0)),
    "Sine2": _Native(_sine2, *_box(-1.0, 1.0)),
    "Sine3": _Native(_sine3, *_box(-1.0, 1.0)),
    "Forrester": _Native(_forrester, *_box(0.0, 1.0)),
    "Levy": _Native(_levy, *_levy_box(), argmin=lambda d: np.ones(d)),
    "Sphere": _Native(_sphere, *_box(-5.12, 5.12), argmin=lambda d: np.zeros(d)),
    "GFunction": _Native(_gfunction, *_box(0.0, 1.0),
                         argmin=lambda d: np.r_[0.5, np.zeros(d - 1)]),
    "GoldsteinPrice": _Native(_goldstein_price, *_box(-2.0, 2.0), argmin=lambda d: np.array([0.0, -1.0])),
    "BukinN6": _Native(_bukin6, lambda d: (-15.0, -3.0), lambda d: (-5.0, 3.0),
                       argmin=lambda d: np.array([-10.0, 1.0])),
    "Rosenbrock": _Native(_rosenbrock, *_box(-5.0, 10.0), argmin=lambda d: np.ones(d)),
    "Beale": _Native(_beale, *_box(-4.5, 4.5), argmin=lambda d: np.array([3.0, 0.5])),
    "Camel": _Native(_camel, lambda d: (-3.0, -2.0), lambda d: (3.0, 2.0),
                     argmin=lambda d: np.array([0.0898, -0.7126])),
    "Perm": _Native(_perm, lambda d: (-float(d),) * d, lambda d: (float(d),) * d,
                    argmin=lambda d: np.arange(1, d + 1, dtype=float)),
    "Branin": _Native(_branin, lambda d: (-5.0, 0.0), lambda d: (10.0, 15.0),
                      argmin=lambda d: np.array([np.pi, 2.275])),
    "StyblinskiTang": _Native(_styblinski_tang, *_box(-5.0, 5.0),
                              argmin=lambda d: np.full(d, -2.903534)),
}

BATTERY_1D = ("Abs", "Step", "Kink", "Square", "Cubic", "Sine1", "Sine2", "Sine3", "Forrester", "Levy")
BATTERY_2D = ("Sphere", "GFunction", "GoldsteinPrice", "Levy2", "BukinN6", "Rosenbrock", "Beale",
              "Camel", "Perm", "Branin", "StyblinskiTang")
BATTERY_HIGH_D = ("GFunction", "Levy", "Perm", "Rosenbrock")
HIGH_DIMS = (5, 10, 20)


def _native_name(name: str) -> str:
    return "Levy" if name == "Levy2" else name


def key(name: str, dim: int) -> str:
    return f"{_native_name(name)}{dim}D"


def native_box(name: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    spec = NATIVE[_native_name(name)]
    return np.array(spec.lower(dim), dtype=float), np.array(spec.upper(dim), dtype=float)


def to_native(name: str, dim: int, x: np.ndarray) -> np.ndarray:
    lo, hi = native_box(name, dim)
    return lo + (np.asarray(x, dtype=float) + 1.0) * 0.5 * (hi - lo)


def from_native(name: str, dim: int, z: np.ndarray) -> np.ndarray:
    lo, hi = native_box(name, dim)
    return 2.0 * (np.asarray(z, dtype=float) - lo) / (hi - lo) - 1.0


def native_eval(name: str, dim: int, x: np.ndarray) -> np.ndarray:
    """Raw library value at points ``x`` given in ``[-1, 1]^d`` coordinates."""
    return NATIVE[_native_name(name)].formula(to_native(name, dim, np.atleast_2d(x)))


@lru_cache(maxsize=1)
def _constants() -> dict:
    with open(CONSTANTS_PATH) as fh:
        return json.load(fh)


@dataclass(frozen=True)
class TestFunction:
    """A battery member: ``eval`` maps ``[-1, 1]^d`` into (about) ``[-1, 1]``.

    With ``negate`` the rescaled output is multiplied by -1 so that the
    function's minimum becomes the maximum sought in optimisation.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    dim: int
    negate: bool = False

    def __post_init__(self):
        if _native_name(self.name) not in NATIVE:
            raise ValueError(f"unknown test function {self.name!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def key(self) -> str:
        return key(self.name, self.dim)

    @property
    def constants(self) -> dict:
        try:
            return _constants()[self.key]
        except KeyError:
            raise KeyError(f"no rescale constants for {self.key}; regenerate constants.json") from None

    @property
    def mid(self) -> float:
        return self.constants["mid"]

    @property
    def half(self) -> float:
        return self.constants["half"]

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1 and (self.dim > 1 or x.shape == (1,))
        x2 = x.reshape(1, -1) if single else (x.reshape(-1, 1) if x.ndim == 1 else x)
        if x2.shape[1] != self.dim:
            raise ValueError(f"{self.key} takes {self.dim}-dimensional inputs, got shape {x.shape}")
        if np.any(np.abs(x2) > 1.0 + 1e-12):
            raise ValueError(f"inputs to {self.key} must lie in [-1, 1]^{self.dim}")
        y = (native_eval(self.name, self.dim, x2) - self.mid) / self.half
        if self.negate:
            y = -y
        return y[0] if single else y

    @property
    def argmax(self) -> np.ndarray | None:
        """Maximiser in ``[-1, 1]^d`` of the (negated) function, when recorded."""
        key_ = "argmin" if self.negate else "argmax"
        v = self.constants.get(key_)
        return None if v is None else np.array(v, dtype=float)

    @property
    def max_value(self) -> float:
        """Known maximum of ``eval`` over the domain."""
        if self.negate:
            return -(self.constants["min"] - self.mid) / self.half
        return (self.constants["max"] - self.mid) / self.half


def get(name: str, dim: int | None = None, negate: bool = False) -> TestFunction:
    if dim is None:
        dim = 2 if name == "Levy2" else 1
    return TestFunction(name, dim, negate)


def eval_function(f: TestFunction, x) -> np.ndarray:
    return f.eval(x)


def bo_function(name: str, dim: int) -> TestFunction:
    return TestFunction(name, dim, negate=True)


def all_keys() -> list[tuple[str, int]]:
    out = [(n, 1) for n in BATTERY_1D] + [(n, 2) for n in BATTERY_2D]
    out += [(n, d) for d in HIGH_DIMS for n in BATTERY_HIGH_D]
    return out
