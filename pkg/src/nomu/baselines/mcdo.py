"""Monte Carlo dropout.

Training and prediction both drop each hidden unit with probability ``p``.
Following the moment formulas, passes are raw: no rescaling by ``1/(1-p)``.
Each prediction pass samples one thinned network, shared by every input in
the batch; mean and population standard deviation are taken over passes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import autodiff as ad
from ..data import Dataset
from ..estimator import as_inputs
from ..network import DenseNetwork, DropoutMask, NetworkSpec, init_params
from ..rng import derive_seed, stream
from ..training import TrainConfig, train_adam

DEFAULT_WIDTHS = (2**10, 2**11, 2**10)


def pass_moments(passes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std over axis 0 of stacked pass outputs."""
    passes = np.asarray(passes, dtype=np.float64)
    flat = np.all(passes == passes[0], axis=0)  # exact agreement gives exactly zero spread
    mean = np.where(flat, passes[0], passes.mean(axis=0))
    return mean, np.where(flat, 0.0, np.sqrt(np.mean((passes - mean) ** 2, axis=0)))


def dropout_loss(x: np.ndarray, y: np.ndarray, spec: NetworkSpec, keep_prob: float):
    """Mean squared error under a fresh per-row dropout mask every step."""
    y = y.reshape(-1, 1)

    def loss(bound, rng):
        mask = DropoutMask.sample(spec, keep_prob, rng, n_rows=len(x))
        return ad.mean(ad.square(ad.sub(bound[0].forward(x, mask), y)))

    return loss


@dataclass
class McdoModel:
    net: DenseNetwork
    drop_prob: float = 0.2
    n_passes: int = 100
    seed: int = 0
    calls: int = 0  # advances per predict call so repeated calls draw new masks

    def __post_init__(self):
        if not 0.0 < self.drop_prob < 1.0:
            raise ValueError("drop_prob must lie in (0, 1)")
        if self.n_passes < 2:
            raise ValueError("need at least 2 passes for a variance")

    @property
    def keep_prob(self) -> float:
        return 1.0 - self.drop_prob

    def passes(self, x) -> np.ndarray:
        x = as_inputs(x, self.net.spec.input_dim)
        rng = stream(self.seed, "mcdo-predict", self.calls)
        self.calls += 1
        out = np.empty((self.n_passes, len(x)))
        for m in range(self.n_passes):
            mask = DropoutMask.sample(self.net.spec, self.keep_prob, rng)
            out[m] = self.net.forward(x, mask)[:, 0]
        return out

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        return pass_moments(self.passes(x))

    def reseeded(self, seed: int) -> "McdoModel":
        return replace(self, seed=seed, calls=0)

    def to_dict(self) -> dict:
        return {"kind": "mcdo", "net": self.net.to_dict(), "drop_prob": self.drop_prob,
                "n_passes": self.n_passes, "seed": self.seed, "calls": self.calls}

    @classmethod
    def from_dict(cls, d: dict) -> "McdoModel":
        return cls(DenseNetwork.from_dict(d["net"]), d["drop_prob"], d["n_passes"], d["seed"], d["calls"])


def mcdo_fit(train: Dataset, widths=DEFAULT_WIDTHS, drop_prob: float = 0.2, n_passes: int = 100,
             config: TrainConfig | None = None, base_lambda: float = 1e-8) -> McdoModel:
    """Train with dropout; L2 is ``(1 - p) * base_lambda / n_train``."""
    config = config or TrainConfig()
    spec = NetworkSpec(train.dim, tuple(widths), 1)
    net0 = init_params(spec, derive_seed(config.seed, "mcdo-init"))
    lam = (1.0 - drop_prob) * base_lambda / len(train)
    res = train_adam(net0, dropout_loss(train.x, train.y, spec, 1.0 - drop_prob),
                     replace(config, l2_lambda=lam))
    return McdoModel(res.net, drop_prob, n_passes, derive_seed(config.seed, "mcdo-masks"))


def mcdo_predict(model: McdoModel, x) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(x)
