"""Deep ensembles of single-output regression networks.

Members differ only by initialisation seed.  The ensemble mean is the member
average and sigma the population standard deviation of member outputs.  An
optional per-member dropout rate (used by hyper ensembles) is applied at
training time; at prediction the activations are scaled by the keep
probability, i.e. the weight-scaling rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..data import Dataset
from ..estimator import as_inputs
from ..network import DenseNetwork, DropoutMask, NetworkSpec, init_params
from ..rng import derive_seed
from ..training import TrainConfig, TrainingDivergedError, mse_loss, train_adam
from .mcdo import dropout_loss, pass_moments

DEFAULT_WIDTHS = (2**8, 2**10, 2**9)


class MemberTrainingError(RuntimeError):
    def __init__(self, member: int, cause: Exception):
        super().__init__(f"ensemble member {member} failed to train: {cause}")
        self.member = member


@dataclass
class Member:
    net: DenseNetwork
    drop_prob: float = 0.0
    l2: float = 0.0
    seed: int = 0

    def predict_mean(self, x: np.ndarray) -> np.ndarray:
        mask = None
        if self.drop_prob > 0:
            mask = DropoutMask.expectation(self.net.spec, 1.0 - self.drop_prob)
        return self.net.forward(x, mask)[:, 0]

    def to_dict(self) -> dict:
        return {"net": self.net.to_dict(), "drop_prob": self.drop_prob, "l2": self.l2, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Member":
        return cls(DenseNetwork.from_dict(d["net"]), d["drop_prob"], d["l2"], d["seed"])


def train_member(train: Dataset, widths, l2: float, config: TrainConfig, init_seed: int,
                 drop_prob: float = 0.0, init: DenseNetwork | None = None) -> Member:
    spec = NetworkSpec(train.dim, tuple(widths), 1)
    net0 = init if init is not None else init_params(spec, init_seed)
    if drop_prob > 0:
        loss = dropout_loss(train.x, train.y, spec, 1.0 - drop_prob)
    else:
        loss = mse_loss(train.x, train.y, "mean")
    res = train_adam(net0, loss, replace(config, l2_lambda=l2, seed=derive_seed(init_seed, "loop")))
    return Member(res.net, drop_prob, l2, init_seed)


@dataclass
class DeepEnsemble:
    members: list[Member]
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        w = np.ones(len(self.members)) if self.weights is None else np.asarray(self.weights, float)
        self.weights = w / w.sum()

    @property
    def dim(self) -> int:
        return self.members[0].net.spec.input_dim

    def member_outputs(self, x) -> np.ndarray:
        x = as_inputs(x, self.dim)
        return np.stack([m.predict_mean(x) for m in self.members])

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        return weighted_moments(self.member_outputs(x), self.weights)

    def to_dict(self) -> dict:
        return {"kind": "de", "members": [m.to_dict() for m in self.members],
                "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DeepEnsemble":
        return cls([Member.from_dict(m) for m in d["members"]], np.array(d["weights"]))


def weighted_moments(outputs: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mixture mean and population std of stacked member outputs."""
    weights = np.asarray(weights, dtype=np.float64)
    if np.allclose(weights, weights[0]):
        return pass_moments(outputs)
    flat = np.all(outputs == outputs[0], axis=0)
    mean = np.where(flat, outputs[0], weights @ outputs)
    return mean, np.where(flat, 0.0, np.sqrt(np.maximum(weights @ (outputs - mean) ** 2, 0.0)))


def de_fit(train: Dataset, n_members: int = 5, widths=DEFAULT_WIDTHS,
           config: TrainConfig | None = None, base_lambda: float = 1e-8) -> DeepEnsemble:
    """Members trained independently with seeds derived from ``(config.seed, m)``."""
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    config = config or TrainConfig()
    lam = base_lambda / len(train)
    members = []
    for m in range(n_members):
        try:
            members.append(train_member(train, widths, lam, config, derive_seed(config.seed, "de", m)))
        except TrainingDivergedError as exc:
            raise MemberTrainingError(m, exc) from exc
    return DeepEnsemble(members)


def de_predict(ens: DeepEnsemble, x) -> tuple[np.ndarray, np.ndarray]:
    return ens.predict(x)
