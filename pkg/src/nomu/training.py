"""Full-batch Adam training with an L2 penalty and best-epoch selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .network import BoundNetwork, DenseNetwork
from .rng import stream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """The training loss became NaN or infinite."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2**10
    learning_rate: float = 1e-3
    l2_lambda: float = 1e-8
    batch_mode: str = "full"
    seed: int = 0
    keep_best: bool = True

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.batch_mode != "full":
            raise ValueError("only full-batch training is supported")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "learning_rate": self.learning_rate,
                "l2_lambda": self.l2_lambda, "batch_mode": self.batch_mode,
                "seed": self.seed, "keep_best": self.keep_best}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainResult:
    nets: list[DenseNetwork]
    best_loss: float
    best_epoch: int
    history: np.ndarray = field(repr=False)

    @property
    def net(self) -> DenseNetwork:
        return self.nets[0]


# loss_fn(bound_nets, rng) -> scalar Tensor, *without* the L2 term
LossFn = Callable[[list[BoundNetwork], np.random.Generator], ad.Tensor]


def train_adam(nets: DenseNetwork | Sequence[DenseNetwork], loss_fn: LossFn, config: TrainConfig,
               trainable: Sequence[bool] | None = None) -> TrainResult:
    """Minimise ``loss_fn + λ·Σ‖θ‖²`` over the trainable networks with Adam.

    The loss recorded for an epoch is evaluated at the parameters *before* that
    epoch's update.  With ``keep_best`` the returned parameters are those with
    the lowest recorded loss; otherwise the parameters after the last update.
    Frozen networks (``trainable[k]`` false) are never modified; ``rng`` handed
    to ``loss_fn`` is a per-run stream for any resampling it needs.
    """
    if isinstance(nets, DenseNetwork):
        nets = [nets]
    nets = [n.copy() for n in nets]
    if trainable is None:
        trainable = [True] * len(nets)
    trainable = list(trainable)
    lam = config.l2_lambda
    rng = stream(config.seed, "train-loop")

    m = [np.zeros_like(n.params) if t else None for n, t in zip(nets, trainable)]
    v = [np.zeros_like(n.params) if t else None for n, t in zip(nets, trainable)]
    history = np.empty(config.epochs)
    best_loss = np.inf
    best_epoch = -1
    best_params = [n.params.copy() for n in nets]

    for epoch in range(config.epochs):
        grads = [np.zeros_like(n.params) if t else None for n, t in zip(nets, trainable)]
        bound = [BoundNetwork(n, g) for n, g in zip(nets, grads)]
        loss_t = loss_fn(bound, rng)
        if loss_t.requires_grad:
            loss_t.backward()
        loss = float(loss_t.value)
        # L2 term handled in closed form: value λ‖θ‖², gradient 2λθ
        for n, g, t in zip(nets, grads, trainable):
            if t and lam > 0:
                loss += lam * float(n.params @ n.params)
                g += 2.0 * lam * n.params
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        history[epoch] = loss
        if loss < best_loss:
            best_loss, best_epoch = loss, epoch
            if config.keep_best:
                best_params = [n.params.copy() for n in nets]

        t_step = epoch + 1
        c1 = 1.0 - ADAM_BETA1**t_step
        c2 = 1.0 - ADAM_BETA2**t_step
        for k, n in enumerate(nets):
            if not trainable[k]:
                continue
            g = grads[k]
            m[k] *= ADAM_BETA1
            m[k] += (1.0 - ADAM_BETA1) * g
            v[k] *= ADAM_BETA2
            v[k] += (1.0 - ADAM_BETA2) * g * g
            n.params -= config.learning_rate * (m[k] / c1) / (np.sqrt(v[k] / c2) + ADAM_EPS)

    if config.keep_best:
        for n, p in zip(nets, best_params):
            n.params[:] = p
        return TrainResult(nets, float(best_loss), best_epoch, history)
    return TrainResult(nets, float(history[-1]), config.epochs - 1, history)


def mse_loss(x: np.ndarray, y: np.ndarray, reduce: str = "mean") -> LossFn:
    """Squared-error data loss on a fixed batch, for single-network fits."""
    if reduce not in ("mean", "sum"):
        raise ValueError("reduce must be 'mean' or 'sum'")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)

    def loss(bound, rng):
        sq = ad.square(ad.sub(bound[0].forward(x), y))
        return ad.mean(sq) if reduce == "mean" else ad.sum(sq)

    return loss
