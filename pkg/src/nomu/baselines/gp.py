"""Gaussian process regression with an RBF kernel.

    k(x, x') = kappa * exp(-||x - x'||^2 / h^2)

The noise floor is added to the Gram matrix for numerical stability only; the
model still treats the data as noiseless.  Hyperparameters are fitted by
maximising the log marginal likelihood in log-space with L-BFGS-B from several
log-uniform starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

from ..data import Dataset
from ..estimator import as_inputs
from ..rng import stream

BOUNDS = (1e-5, 1e5)


class GpFactorizationError(np.linalg.LinAlgError):
    pass


def rbf_kernel(a: np.ndarray, b: np.ndarray, kappa: float, h: float) -> np.ndarray:
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * a @ b.T
    return kappa * np.exp(-np.maximum(sq, 0.0) / (h * h))


def _closest_pair(x: np.ndarray) -> tuple[int, int]:
    d = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return int(min(i, j)), int(max(i, j))


def _factor(x: np.ndarray, kappa: float, h: float, noise: float):
    gram = rbf_kernel(x, x, kappa, h) + noise * np.eye(len(x))
    try:
        return cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        i, j = _closest_pair(x) if len(x) > 1 else (0, 0)
        raise GpFactorizationError(
            f"Gram matrix not positive definite; inputs {i} and {j} are nearly identical") from None


def log_marginal_likelihood(x: np.ndarray, y: np.ndarray, kappa: float, h: float,
                            noise: float = 1e-7) -> float:
    cf = _factor(x, kappa, h, noise)
    alpha = cho_solve(cf, y, check_finite=False)
    return float(-0.5 * y @ alpha - np.sum(np.log(np.diag(cf[0]))) - 0.5 * len(y) * np.log(2 * np.pi))


@dataclass
class RbfGpModel:
    x: np.ndarray
    y: np.ndarray
    kappa: float
    h: float
    noise: float = 1e-7
    _cf: tuple = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self._cf is None:
            self._cf = _factor(self.x, self.kappa, self.h, self.noise)
            self._alpha = cho_solve(self._cf, self.y, check_finite=False)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = as_inputs(x, self.dim)
        ks = rbf_kernel(x, self.x, self.kappa, self.h)
        mean = ks @ self._alpha
        v = solve_triangular(self._cf[0], ks.T, lower=True, check_finite=False)
        var = self.kappa - np.sum(v * v, axis=0)
        return mean, np.sqrt(np.maximum(var, 0.0))

    def to_dict(self) -> dict:
        return {"kind": "gp", "x": self.x.tolist(), "y": self.y.tolist(), "kappa": self.kappa,
                "h": self.h, "noise": self.noise}

    @classmethod
    def from_dict(cls, d: dict) -> "RbfGpModel":
        return cls(np.array(d["x"]), np.array(d["y"]), d["kappa"], d["h"], d["noise"])


def gp_fit(train: Dataset, kappa: float = 4.0, h_opt: bool = True, h: float = 1.0,
           kappa_opt: bool = False, restarts: int = 10, noise: float = 1e-7, seed: int = 0) -> RbfGpModel:
    """Fit the GP; optionally maximise the marginal likelihood over ``h`` (and ``kappa``).

    With ``kappa_opt`` the given ``kappa`` is the first start value.  Restarts
    after the first are drawn log-uniformly from the bounds.
    """
    x, y = train.x, train.y
    if not (h_opt or kappa_opt):
        return RbfGpModel(x, y, kappa, h, noise)
    lo, hi = np.log(BOUNDS[0]), np.log(BOUNDS[1])
    rng = stream(seed, "gp-restarts")

    def unpack(p):
        k = np.exp(p[0]) if kappa_opt else kappa
        hh = np.exp(p[-1]) if h_opt else h
        return k, hh

    def objective(p):
        k, hh = unpack(p)
        try:
            return -log_marginal_likelihood(x, y, k, hh, noise)
        except np.linalg.LinAlgError:
            return 1e25

    n_par = int(kappa_opt) + int(h_opt)
    first = ([np.log(kappa)] if kappa_opt else []) + ([np.log(h)] if h_opt else [])
    starts = [np.array(first)] + [rng.uniform(lo, hi, n_par) for _ in range(restarts - 1)]
    best_p, best_v = starts[0], objective(starts[0])
    for p0 in starts:
        res = minimize(objective, p0, method="L-BFGS-B", bounds=[(lo, hi)] * n_par)
        if res.fun < best_v:
            best_p, best_v = res.x, res.fun
    k, hh = unpack(best_p)
    return RbfGpModel(x, y, float(k), float(hh), noise)


def gp_predict(model: RbfGpModel, x) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(x)
