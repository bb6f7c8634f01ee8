"""Dense feed-forward networks stored as one flat parameter vector.

Parameter layout (layer-major): for each layer ``k`` in order, the weight matrix
``W_k`` of shape ``(fan_in, fan_out)`` flattened row-major, followed by the bias
vector ``b_k`` of length ``fan_out``.  Hidden layers use ReLU; the output layer
is linear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .rng import stream

FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_layers: tuple[int, ...]
    output_dim: int = 1
    activation: str = "relu"
    init_range: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        widths = (self.input_dim, *self.hidden_layers, self.output_dim)
        if any(int(w) < 1 for w in widths):
            raise ValueError(f"all layer widths must be >= 1, got {widths}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not self.init_range > 0:
            raise ValueError("init_range must be > 0")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.output_dim)

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum(w[k] * w[k + 1] + w[k + 1] for k in range(len(w) - 1))

    def layer_slices(self) -> list[tuple[slice, tuple[int, int], slice]]:
        """(weight slice, weight shape, bias slice) per layer into the flat vector."""
        out = []
        offset = 0
        w = self.widths
        for k in range(len(w) - 1):
            n_w = w[k] * w[k + 1]
            ws = slice(offset, offset + n_w)
            bs = slice(offset + n_w, offset + n_w + w[k + 1])
            out.append((ws, (w[k], w[k + 1]), bs))
            offset += n_w + w[k + 1]
        return out

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_layers": list(self.hidden_layers),
                "output_dim": self.output_dim, "activation": self.activation,
                "init_range": self.init_range}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(int(d["input_dim"]), tuple(d["hidden_layers"]), int(d["output_dim"]),
                   d.get("activation", "relu"), float(d.get("init_range", 0.05)))


@dataclass
class DropoutMask:
    """Per-hidden-layer keep vectors.

    Each entry has the width of its hidden layer, or shape ``(n, width)`` to give
    every batch row its own mask.  Entries are multiplied into the post-ReLU
    activations, so a float vector of ``keep_prob`` gives the expectation pass.
    """

    keep: list[np.ndarray]
    keep_prob: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must lie in (0, 1]")

    def check(self, spec: NetworkSpec) -> None:
        if len(self.keep) != len(spec.hidden_layers):
            raise ValueError(f"mask has {len(self.keep)} layers, network has {len(spec.hidden_layers)}")
        for m, w in zip(self.keep, spec.hidden_layers):
            if np.shape(m)[-1] != w:
                raise ValueError(f"mask width {np.shape(m)[-1]} does not match layer width {w}")

    @classmethod
    def sample(cls, spec: NetworkSpec, keep_prob: float, rng: np.random.Generator,
               n_rows: int | None = None) -> "DropoutMask":
        shape = (lambda w: (w,)) if n_rows is None else (lambda w: (n_rows, w))
        keep = [rng.random(shape(w)) < keep_prob for w in spec.hidden_layers]
        return cls(keep, keep_prob)

    @classmethod
    def expectation(cls, spec: NetworkSpec, keep_prob: float) -> "DropoutMask":
        return cls([np.full(w, keep_prob) for w in spec.hidden_layers], keep_prob)


@dataclass
class DenseNetwork:
    spec: NetworkSpec
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.spec.n_params,):
            raise ValueError(f"expected {self.spec.n_params} params, got shape {self.params.shape}")

    def layers(self, params: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        p = self.params if params is None else params
        return [(p[ws].reshape(shape), p[bs]) for ws, shape, bs in self.spec.layer_slices()]

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(self.spec, self.params.copy())

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"input has shape {np.shape(x)}, network expects "
                             f"(n, {self.spec.input_dim})")
        return x, single

    def forward_with_hidden(self, x, mask: DropoutMask | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Outputs and last-hidden-layer activations for a batch (numpy fast path)."""
        x, single = self._check_input(x)
        if mask is not None:
            mask.check(self.spec)
        h = x
        layers = self.layers()
        for k, (w, b) in enumerate(layers[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            if mask is not None:
                h = h * mask.keep[k]
        w, b = layers[-1]
        out = h @ w + b
        if single:
            return out[0], h[0]
        return out, h

    def forward(self, x, mask: DropoutMask | None = None) -> np.ndarray:
        return self.forward_with_hidden(x, mask)[0]

    # ---- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        return {"format": "nomu.dense-network", "version": FORMAT_VERSION,
                "spec": self.spec.to_dict(), "params": self.params.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNetwork":
        if d.get("format") != "nomu.dense-network":
            raise ValueError(f"not a dense-network document: {d.get('format')!r}")
        if int(d.get("version", -1)) != FORMAT_VERSION:
            raise ValueError(f"unsupported network format version {d.get('version')}")
        return cls(NetworkSpec.from_dict(d["spec"]), np.array(d["params"], dtype=np.float64))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "DenseNetwork":
        return cls.from_dict(json.loads(text))


def init_params(spec: NetworkSpec, seed: int) -> DenseNetwork:
    """Every parameter i.i.d. uniform on ``[-init_range, init_range]``."""
    rng = stream(seed, "init", spec.widths)
    return DenseNetwork(spec, rng.uniform(-spec.init_range, spec.init_range, spec.n_params))


def forward(net: DenseNetwork, x, mask: DropoutMask | None = None) -> np.ndarray:
    return net.forward(x, mask)


class BoundNetwork:
    """Graph-side view of a network: its parameters as autodiff leaves.

    When ``grad`` is given (a flat buffer the size of ``net.params``), leaf
    gradients accumulate straight into it.  Without it the parameters are
    constants of the graph.
    """

    def __init__(self, net: DenseNetwork, grad: np.ndarray | None = None):
        self.net = net
        self.grad = grad
        trainable = grad is not None
        self.leaves: list[tuple[ad.Tensor, ad.Tensor]] = []
        for ws, shape, bs in net.spec.layer_slices():
            w = ad.Tensor(net.params[ws].reshape(shape), requires_grad=trainable,
                          grad=grad[ws].reshape(shape) if trainable else None)
            b = ad.Tensor(net.params[bs], requires_grad=trainable,
                          grad=grad[bs] if trainable else None)
            self.leaves.append((w, b))

    @property
    def spec(self) -> NetworkSpec:
        return self.net.spec

    def forward_with_hidden(self, x, mask: DropoutMask | None = None) -> tuple[ad.Tensor, ad.Tensor]:
        if isinstance(x, ad.Tensor):
            xv = x
        else:
            xv = ad.Tensor(self.net._check_input(x)[0])
        if xv.shape[-1] != self.spec.input_dim:
            raise ValueError(f"input width {xv.shape[-1]} != {self.spec.input_dim}")
        if mask is not None:
            mask.check(self.spec)
        h = xv
        for k, (w, b) in enumerate(self.leaves[:-1]):
            h = ad.relu(ad.affine(h, w, b))
            if mask is not None:
                h = ad.mul(h, np.asarray(mask.keep[k], dtype=np.float64))
        w, b = self.leaves[-1]
        return ad.affine(h, w, b), h

    def forward(self, x, mask: DropoutMask | None = None) -> ad.Tensor:
        return self.forward_with_hidden(x, mask)[0]

    def sq_norm(self) -> ad.Tensor:
        total = None
        for w, b in self.leaves:
            term = ad.add(ad.sum(ad.square(w)), ad.sum(ad.square(b)))
            total = term if total is None else ad.add(total, term)
        return total


def gradient(loss_fn, net: DenseNetwork) -> np.ndarray:
    """Exact reverse-mode gradient of ``loss_fn(bound_net)`` w.r.t. ``net.params``."""
    grad = np.zeros_like(net.params)
    loss = loss_fn(BoundNetwork(net, grad))
    if not isinstance(loss, ad.Tensor) or loss.value.ndim != 0:
        raise ValueError("loss_fn must return a scalar Tensor")
    loss.backward()
    return grad


def value_and_gradients(loss_fn, nets: Sequence[DenseNetwork],
                        trainable: Sequence[bool] | None = None) -> tuple[float, list[np.ndarray | None]]:
    """Evaluate ``loss_fn(*bound_nets)`` and the gradient for each trainable net."""
    if trainable is None:
        trainable = [True] * len(nets)
    grads = [np.zeros_like(n.params) if t else None for n, t in zip(nets, trainable)]
    bound = [BoundNetwork(n, g) for n, g in zip(nets, grads)]
    loss = loss_fn(*bound)
    if loss.requires_grad:
        loss.backward()
    return float(loss.value), grads
