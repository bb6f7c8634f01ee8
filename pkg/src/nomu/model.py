"""NOMU: a prediction network paired with a raw-uncertainty network.

The r-network sees ``x`` concatenated with the f-network's last hidden layer.
That cross-connection is forward-only: gradients of the loss never reach the
f-network through it, so the uncertainty terms cannot bend the prediction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import autodiff as ad
from .data import Box, Dataset
from .estimator import UncertaintyBound, as_inputs, bounds_from
from .network import BoundNetwork, DenseNetwork, NetworkSpec, init_params
from .rng import derive_seed
from .training import TrainConfig, TrainResult, train_adam

FORMAT_VERSION = 1
READOUTS = ("exponential", "linearized")


@dataclass(frozen=True)
class NomuHyperparams:
    mu_sqr: float = 0.1
    mu_exp: float = 0.01
    c_exp: float = 30.0
    lambda_reg: float = 1e-8
    sigma_min: float = 1e-3
    sigma_max: float = 2.0
    n_art: int = 128
    readout_kind: str = "exponential"

    def __post_init__(self):
        for name in ("mu_sqr", "mu_exp", "c_exp", "lambda_reg", "sigma_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.sigma_min < 0:
            raise ValueError("sigma_min must be >= 0")
        if int(self.n_art) < 1:
            raise ValueError("n_art must be >= 1")
        if self.readout_kind not in READOUTS:
            raise ValueError(f"readout_kind must be one of {READOUTS}")
        if self.readout_kind == "linearized" and not self.sigma_min < self.sigma_max:
            raise ValueError("linearized readout needs sigma_min < sigma_max")

    @classmethod
    def regression(cls, dim: int = 1, **overrides) -> "NomuHyperparams":
        return cls(n_art=128 if dim == 1 else 256, **overrides)

    @classmethod
    def bo(cls, **overrides) -> "NomuHyperparams":
        base = dict(mu_sqr=1.0, sigma_min=1e-6, n_art=500)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def irradiance(cls, **overrides) -> "NomuHyperparams":
        base = dict(lambda_reg=1e-19, mu_exp=0.05, sigma_min=0.01)
        base.update(overrides)
        return cls(**base)


def readout(z, sigma_min: float, sigma_max: float):
    """``sigma_max * (1 - exp(-(max(0, z) + sigma_min) / sigma_max))``."""
    z = np.asarray(z, dtype=np.float64)
    return sigma_max * (1.0 - np.exp(-(np.maximum(0.0, z) + sigma_min) / sigma_max))


def readout_linearized(z, sigma_min: float, sigma_max: float):
    """Clamp of ``z`` to ``[sigma_min, sigma_max]`` written with two ReLUs."""
    z = np.asarray(z, dtype=np.float64)
    return sigma_min + np.maximum(0.0, z - sigma_min) - np.maximum(0.0, z - sigma_max)


def apply_readout(z, hp: NomuHyperparams):
    fn = readout if hp.readout_kind == "exponential" else readout_linearized
    return fn(z, hp.sigma_min, hp.sigma_max)


@dataclass
class NomuModel:
    f_net: DenseNetwork
    r_net: DenseNetwork
    hp: NomuHyperparams
    domain: Box
    noise_output: bool = False

    def __post_init__(self):
        fs, rs = self.f_net.spec, self.r_net.spec
        expected = fs.input_dim + fs.hidden_layers[-1]
        if rs.input_dim != expected:
            raise ValueError(f"r-network input width {rs.input_dim} != x dim {fs.input_dim} "
                             f"+ f last hidden width {fs.hidden_layers[-1]}")
        if rs.output_dim != 1:
            raise ValueError("r-network must have a single output")
        if fs.output_dim != (2 if self.noise_output else 1):
            raise ValueError("f-network output width does not match noise_output setting")

    @property
    def dim(self) -> int:
        return self.f_net.spec.input_dim

    def raw_outputs(self, x) -> tuple[np.ndarray, np.ndarray]:
        """f-network outputs (n, 1 or 2) and raw uncertainty (n,)."""
        x = as_inputs(x, self.dim)
        out, hidden = self.f_net.forward_with_hidden(x)
        raw = self.r_net.forward(np.concatenate([x, hidden], axis=1))[:, 0]
        return out, raw

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        out, raw = self.raw_outputs(x)
        return out[:, 0], apply_readout(raw, self.hp)

    def predict_noise(self, x) -> np.ndarray:
        if not self.noise_output:
            raise ValueError("model has no data-noise output")
        out, _ = self.raw_outputs(x)
        return np.exp(out[:, 1])

    def bounds(self, x, c: float) -> UncertaintyBound:
        mean, sigma = self.predict(x)
        return bounds_from(mean, sigma, c)

    # ---- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        return {"format": "nomu.model", "version": FORMAT_VERSION, "hp": asdict(self.hp),
                "domain": self.domain.to_dict(), "noise_output": self.noise_output,
                "f_net": self.f_net.to_dict(), "r_net": self.r_net.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "NomuModel":
        if d.get("format") != "nomu.model" or int(d.get("version", -1)) != FORMAT_VERSION:
            raise ValueError("not a supported NOMU model bundle")
        return cls(DenseNetwork.from_dict(d["f_net"]), DenseNetwork.from_dict(d["r_net"]),
                   NomuHyperparams(**d["hp"]), Box.from_dict(d["domain"]), bool(d["noise_output"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "NomuModel":
        return cls.from_dict(json.loads(text))


def predict_bounds(model: NomuModel, x, c: float) -> UncertaintyBound:
    return model.bounds(x, c)


# ---- loss ----------------------------------------------------------------

def _graph_outputs(f: BoundNetwork, r: BoundNetwork, x: np.ndarray) -> tuple[ad.Tensor, ad.Tensor]:
    """f-network output and raw uncertainty for a batch, as graph nodes."""
    out, hidden = f.forward_with_hidden(x)
    r_in = ad.concat([ad.Tensor(x), ad.stop_gradient(hidden)], axis=1)
    return out, r.forward(r_in)


def loss_terms(f: BoundNetwork, r: BoundNetwork, train: Dataset, x_art: np.ndarray,
               hp: NomuHyperparams) -> tuple[ad.Tensor, ad.Tensor, ad.Tensor]:
    """The three unweighted terms: squared error, in-sample raw², MC exp-term."""
    if len(train) == 0:
        raise ValueError("training set is empty")
    n = len(train)
    out, raw = _graph_outputs(f, r, np.concatenate([train.x, x_art], axis=0))
    resid = ad.sub(ad.rows(out, slice(0, n)), train.y.reshape(-1, 1))
    term_a = ad.sum(ad.square(resid))
    term_b = ad.sum(ad.square(ad.rows(raw, slice(0, n))))
    term_c = ad.mean(ad.exp(ad.mul(ad.rows(raw, slice(n, None)), -hp.c_exp)))
    return term_a, term_b, term_c


def nomu_loss_graph(f: BoundNetwork, r: BoundNetwork, train: Dataset, x_art: np.ndarray,
                    hp: NomuHyperparams) -> ad.Tensor:
    a, b, c = loss_terms(f, r, train, x_art, hp)
    return ad.add(ad.add(a, ad.mul(b, hp.mu_sqr)), ad.mul(c, hp.mu_exp))


def nomu_loss(model: NomuModel, train: Dataset, x_art, hp: NomuHyperparams | None = None) -> float:
    """Loss value (without the L2 term) at the model's current parameters."""
    hp = model.hp if hp is None else hp
    x_art = as_inputs(x_art, model.dim)
    return float(nomu_loss_graph(BoundNetwork(model.f_net), BoundNetwork(model.r_net),
                                 train, x_art, hp).value)


def noise_loss_graph(f: BoundNetwork, r: BoundNetwork, train: Dataset, x_art: np.ndarray,
                     hp: NomuHyperparams, noise_sigma=None) -> ad.Tensor:
    """Data-noise variant: residuals and in-sample raw² weighted by 1/(2 s²).

    ``s`` is the learned ``exp`` of the f-network's second output, or the given
    ``noise_sigma`` (scalar or per-point), in which case the ``ln s`` term is dropped.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    n = len(train)
    out, raw = _graph_outputs(f, r, np.concatenate([train.x, x_art], axis=0))
    out_tr = ad.rows(out, (slice(0, n), slice(0, 1)))
    resid_sq = ad.square(ad.sub(out_tr, train.y.reshape(-1, 1)))
    raw_sq = ad.square(ad.rows(raw, slice(0, n)))
    if noise_sigma is None:
        log_s = ad.rows(out, (slice(0, n), slice(1, 2)))
        two_s2 = ad.mul(ad.exp(ad.mul(log_s, 2.0)), 2.0)
        fit = ad.add(ad.sum(ad.div(resid_sq, two_s2)), ad.sum(log_s))
    else:
        s = np.broadcast_to(np.asarray(noise_sigma, dtype=np.float64).reshape(-1, 1), (n, 1))
        if np.any(s <= 0):
            raise ValueError("noise standard deviation must be > 0")
        two_s2 = 2.0 * s * s
        fit = ad.sum(ad.div(resid_sq, two_s2))
    term_b = ad.sum(ad.div(raw_sq, two_s2))
    term_c = ad.mean(ad.exp(ad.mul(ad.rows(raw, slice(n, None)), -hp.c_exp)))
    return ad.add(ad.add(fit, ad.mul(term_b, hp.mu_sqr)), ad.mul(term_c, hp.mu_exp))


def nomu_loss_with_noise(model: NomuModel, train: Dataset, x_art, hp: NomuHyperparams | None = None,
                         noise_sigma=None) -> float:
    hp = model.hp if hp is None else hp
    if noise_sigma is None and not model.noise_output:
        raise ValueError("unknown noise needs a model with a data-noise output")
    x_art = as_inputs(x_art, model.dim)
    return float(noise_loss_graph(BoundNetwork(model.f_net), BoundNetwork(model.r_net),
                                  train, x_art, hp, noise_sigma).value)


# ---- fitting -------------------------------------------------------------

def default_specs(dim: int, width: int = 2**10, depth: int = 3,
                  noise_output: bool = False) -> tuple[NetworkSpec, NetworkSpec]:
    hidden = (width,) * depth
    return (NetworkSpec(dim, hidden, 2 if noise_output else 1),
            NetworkSpec(dim + hidden[-1], hidden, 1))


def _check_train(train: Dataset, domain: Box):
    if len(train) == 0:
        raise ValueError("training set is empty")
    if not np.all(np.isfinite(train.y)):
        raise ValueError("training targets must be finite")
    if train.dim != domain.dim:
        raise ValueError("training inputs do not match the domain dimension")


def fit_nomu(train: Dataset, hp: NomuHyperparams, specs: tuple[NetworkSpec, NetworkSpec],
             config: TrainConfig, domain: Box | None = None, noise_sigma=None,
             noise_output: bool = False) -> NomuModel:
    """Train both subnetworks jointly on the loss plus ``hp.lambda_reg * ||θ||²``.

    ``hp.lambda_reg`` overrides ``config.l2_lambda``.  Fresh artificial points
    are drawn uniformly on ``domain`` at every step.  With ``noise_sigma`` or
    ``noise_output`` the data-noise variant of the loss is used.
    """
    domain = Box.unit(train.dim) if domain is None else domain
    _check_train(train, domain)
    f_spec, r_spec = specs
    f0 = init_params(f_spec, derive_seed(config.seed, "f-net"))
    r0 = init_params(r_spec, derive_seed(config.seed, "r-net"))
    NomuModel(f0, r0, hp, domain, noise_output)  # validates the pairing
    use_noise = noise_output or noise_sigma is not None

    def loss_fn(bound, rng):
        x_art = domain.sample(rng, hp.n_art)
        if use_noise:
            return noise_loss_graph(bound[0], bound[1], train, x_art, hp, noise_sigma)
        return nomu_loss_graph(bound[0], bound[1], train, x_art, hp)

    result = train_adam([f0, r0], loss_fn, replace(config, l2_lambda=hp.lambda_reg))
    return NomuModel(result.nets[0], result.nets[1], hp, domain, noise_output)


def attach_to_pretrained(f_net: DenseNetwork, train: Dataset, hp: NomuHyperparams,
                         spec_r: NetworkSpec, config: TrainConfig, domain: Box | None = None,
                         noise_sigma=None) -> NomuModel:
    """Train only an r-network on top of a frozen, already trained f-network."""
    domain = Box.unit(train.dim) if domain is None else domain
    _check_train(train, domain)
    need = f_net.spec.input_dim + f_net.spec.hidden_layers[-1]
    if spec_r.input_dim != need:
        raise ValueError(f"r-network input width {spec_r.input_dim} does not match "
                         f"x dim + f last hidden width = {need}")
    r0 = init_params(spec_r, derive_seed(config.seed, "r-net"))
    noise_output = f_net.spec.output_dim == 2

    def loss_fn(bound, rng):
        x_art = domain.sample(rng, hp.n_art)
        if noise_output or noise_sigma is not None:
            return noise_loss_graph(bound[0], bound[1], train, x_art, hp, noise_sigma)
        return nomu_loss_graph(bound[0], bound[1], train, x_art, hp)

    result: TrainResult = train_adam([f_net, r0], loss_fn, replace(config, l2_lambda=hp.lambda_reg),
                                     trainable=[False, True])
    return NomuModel(f_net, result.nets[1], hp, domain, noise_output)
