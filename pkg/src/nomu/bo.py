"""Bayesian optimisation with upper uncertainty bounds as acquisition.

Inputs live in the normalised box ``[-1, 1]^d`` and functions are negated and
scaled to ``[-1, 1]`` so that larger is better.  The initial calibration
constant comes from MW scaling on the ``n_init`` starting points; each step
starts from that constant and doubles it while the proposal stays within
``delta_i`` of an observed input.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .algorithms import ALGORITHMS, Recipe, fit_estimator
from .data import Dataset
from .rng import derive_seed, stream
from .testbed.functions import TestFunction


_BO_DIM = re.compile(r"(\d+)D$")


class DegenerateEstimatorError(ValueError):
    pass


class BoStepError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"BO step {step} failed: {cause}")
        self.step = step


@dataclass(frozen=True)
class BoConfig:
    n_init: int = 8
    n_steps: int = 64
    mw_target: float = 0.5
    delta_start: float = 1.0 / 16.0
    delta_end: float = 0.01
    max_c_doublings: int = 15
    restarts: int = 100
    local_steps: int = 200
    n_probe: int = 2048

    def __post_init__(self):
        if not 0.0 < self.delta_end < self.delta_start:
            raise ValueError("need 0 < delta_end < delta_start")
        if self.mw_target <= 0:
            raise ValueError("mw_target must be > 0")
        if self.n_init < 1 or self.n_steps < 1:
            raise ValueError("n_init and n_steps must be >= 1")

    @property
    def n_end(self) -> int:
        return self.n_init + self.n_steps

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BoConfig":
        return cls(**d)


def delta_schedule(i: int, n_start: int = 8, n_end: int = 72, delta_start: float = 1.0 / 16.0,
                   delta_end: float = 0.01) -> float:
    """Exponential decay from ``delta_start`` at ``n_start`` to ``delta_end`` at ``n_end``."""
    if not n_start <= i <= n_end:
        raise ValueError(f"i={i} outside [{n_start}, {n_end}]")
    if i == n_start:
        return float(delta_start)
    if i == n_end:
        return float(delta_end)
    return delta_start * (delta_end / delta_start) ** ((i - n_start) / (n_end - n_start))


def mw_scale(estimator, target_mw: float, probe: np.ndarray) -> float:
    """The c whose mean UB width over ``probe`` equals ``target_mw``."""
    _, sigma = estimator.predict(probe)
    m = float(np.mean(sigma))
    if not m > 0:
        raise DegenerateEstimatorError("degenerate estimator: mean sigma on the probe set is 0")
    return target_mw / (2.0 * m)


def maximise_ucb(estimator, c: float, dim: int, rng: np.random.Generator, restarts: int = 100,
                 local_steps: int = 200) -> tuple[np.ndarray, float]:
    """Multi-start coordinate pattern search for ``max mean + c * sigma`` on ``[-1, 1]^d``.

    All starts move together: each step tries ``+/- s`` along one coordinate per
    start, keeps improvements, and halves a start's step after a full sweep of
    coordinates without progress.
    """
    def acq(x):
        mean, sigma = estimator.predict(x)
        return mean + c * sigma

    x = rng.uniform(-1.0, 1.0, size=(restarts, dim))
    val = acq(x)
    step = np.full(restarts, 0.5)
    stale = np.zeros(restarts, dtype=int)
    rows = np.arange(restarts)
    for t in range(local_steps):
        k = t % dim
        cand = np.concatenate([x, x])
        cand[:restarts, k] += step
        cand[restarts:, k] -= step
        np.clip(cand, -1.0, 1.0, out=cand)
        cv = acq(cand).reshape(2, restarts)
        pick = np.argmax(cv, axis=0)
        best = cv[pick, rows]
        up = best > val
        x[up] = cand[pick[up] * restarts + rows[up]]
        val[up] = best[up]
        stale = np.where(up, 0, stale + 1)
        shrink = stale >= dim
        step[shrink] *= 0.5
        stale[shrink] = 0
    j = int(np.argmax(val))
    return x[j].copy(), float(val[j])


@dataclass
class Proposal:
    x: np.ndarray
    c: float
    doublings: int
    accepted: bool  # False when the doubling budget ran out


def propose_next(observed: np.ndarray, estimator, c0: float, delta: float, config: BoConfig,
                 rng_seed: int, dynamic: bool = True) -> Proposal:
    """Maximise the upper bound, doubling c while the argmax is within ``delta`` of an observation."""
    dim = observed.shape[1]
    c = c0
    for k in range(config.max_c_doublings + 1):
        rng = stream(rng_seed, "acq", k)
        x, _ = maximise_ucb(estimator, c, dim, rng, config.restarts, config.local_steps)
        far = np.min(np.linalg.norm(observed - x, axis=1)) > delta
        if far or not dynamic:
            return Proposal(x, c, k, True)
        if k < config.max_c_doublings:
            c = c0 * 2.0 ** (k + 1)
    return Proposal(x, c, config.max_c_doublings, False)


@dataclass
class StepLog:
    step: int
    x: list[float]
    y: float
    c: float
    doublings: int
    regret: float


@dataclass
class BoState:
    function: str
    dim: int
    algorithm: str
    config: BoConfig
    seed: int
    x: np.ndarray
    y: np.ndarray
    c0: float = math.nan
    log: list[StepLog] = field(default_factory=list)

    @property
    def best(self) -> float:
        return float(np.max(self.y))

    @property
    def regret_trace(self) -> np.ndarray:
        return np.array([s.regret for s in self.log])

    @property
    def final_regret(self) -> float:
        return self.log[-1].regret

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", *[f"x{j}" for j in range(self.dim)], "y", "c", "doublings", "regret"])
        for s in self.log:
            w.writerow([s.step, *map(repr, s.x), repr(s.y), repr(s.c), s.doublings, repr(s.regret)])
        return buf.getvalue()

    @staticmethod
    def read_csv(text: str) -> list[dict]:
        rows = []
        for r in csv.DictReader(io.StringIO(text)):
            rows.append({k: (int(v) if k in ("step", "doublings") else float(v)) for k, v in r.items()})
        return rows


def _regret(f: TestFunction, best: float) -> float:
    return float(min(2.0, max(0.0, f.max_value - best)))


def probe_set(seed: int, n: int, dim: int) -> np.ndarray:
    """Uniform MW-scaling probe points, shared by every algorithm of one run."""
    return stream(seed, "mw-probe", dim).uniform(-1.0, 1.0, size=(n, dim))


def run_bo(f: TestFunction, algorithm: str, config: BoConfig, seed: int,
           recipe: Recipe | None = None, data_seed: int | None = None) -> BoState:
    """One BO run: ``n_init`` uniform points, then ``n_steps`` proposals one by one.

    Step 0 records the best initial point.  Every later step refits the
    estimator from scratch on all observations with a step-derived seed.
    ``data_seed`` (default ``seed``) fixes the initial points and the probe
    set, so algorithms sharing it start from the same design.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    recipe = recipe or Recipe.full("bo")
    d = f.dim
    data_seed = seed if data_seed is None else data_seed
    x = stream(data_seed, "bo-init", d).uniform(-1.0, 1.0, size=(config.n_init, d))
    y = f.eval(x)
    state = BoState(f.key, d, algorithm, config, seed, x, y)
    state.log.append(StepLog(0, x[int(np.argmax(y))].tolist(), float(np.max(y)), math.nan, 0,
                             _regret(f, state.best)))
    rand = stream(seed, "rand-proposals", d)
    for t in range(1, config.n_steps + 1):
        i = len(state.y)
        try:
            if algorithm == "RAND":
                prop = Proposal(rand.uniform(-1.0, 1.0, size=d), math.nan, 0, True)
            else:
                train = Dataset(state.x, state.y, {"bo": f.key, "step": t})
                est = fit_estimator(algorithm, train, derive_seed(seed, "bo-step", t), recipe)
                if algorithm == "pGP":
                    c0 = 1.0
                elif t == 1:
                    c0 = mw_scale(est, config.mw_target, probe_set(data_seed, config.n_probe, d))
                    state.c0 = c0
                else:
                    c0 = state.c0
                delta = delta_schedule(i, config.n_init, config.n_end, config.delta_start, config.delta_end)
                prop = propose_next(state.x, est, c0, delta, config, derive_seed(seed, "bo-acq", t),
                                    dynamic=algorithm != "pGP")
            y_new = float(f.eval(prop.x[None, :])[0])
        except Exception as exc:
            raise BoStepError(t, exc) from exc
        state.x = np.vstack([state.x, prop.x])
        state.y = np.append(state.y, y_new)
        state.log.append(StepLog(t, prop.x.tolist(), y_new, prop.c, prop.doublings, _regret(f, state.best)))
    return state


def aggregate_regrets(groups: dict) -> dict:
    """Mean final regret with a normal 95% CI per ``(function, algorithm, mw_target)`` key."""
    out: dict = {}
    for (fn, alg, mw), v in sorted(groups.items()):
        v = np.asarray(v, dtype=np.float64)
        half = 1.96 * v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else 0.0
        m = _BO_DIM.search(fn)
        entry = out.setdefault(fn, {"dim": int(m.group(1)) if m else None})
        entry.setdefault(alg, {})[repr(mw)] = {"mean": float(v.mean()), "ci": float(half), "n": len(v)}
    return out


def states_by_key(states: list[BoState]) -> dict:
    groups: dict = {}
    for s in states:
        groups.setdefault((s.function, s.algorithm, s.config.mw_target), []).append(s.final_regret)
    return groups
