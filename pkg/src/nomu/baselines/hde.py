"""Hyper deep ensembles: random hyperparameter search, greedy selection, stratification.

The greedy step grows an ensemble with replacement, each time adding the pool
member that gives the lowest validation score, and stops as soon as the best
addition fails to strictly improve on the current score.  Additions that would
push the number of distinct members above ``M`` are not considered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..data import Dataset
from ..rng import derive_seed, stream
from ..training import TrainConfig, TrainingDivergedError
from .ensemble import DEFAULT_WIDTHS, DeepEnsemble, Member, train_member, weighted_moments

SIGMA_FLOOR = 1e-3  # keeps the score finite for ensembles whose members all agree


class HdeTrainingError(RuntimeError):
    def __init__(self, draw: int, seed: int, cause: Exception):
        super().__init__(f"hyper-ensemble candidate {draw} (seed {seed}) failed to train: {cause}")
        self.draw = draw
        self.seed = seed


@dataclass(frozen=True)
class HdeConfig:
    size: int = 5
    search: int = 50
    drop_range: tuple[float, float] = (0.001, 0.9)
    l2_base: float = 1e-8
    l2_decades: float = 3.0
    train_frac: float = 0.8
    refit_all: bool = False  # the starred variant: continue training on every point
    widths: tuple[int, ...] = DEFAULT_WIDTHS

    def __post_init__(self):
        if self.size < 1 or self.search < self.size:
            raise ValueError("need 1 <= size <= search")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must lie in (0, 1)")
        lo, hi = self.drop_range
        if not 0.0 < lo < hi < 1.0:
            raise ValueError("drop_range must satisfy 0 < lo < hi < 1")

    @classmethod
    def starred(cls, **overrides) -> "HdeConfig":
        base = dict(train_frac=0.7, drop_range=(0.001, 0.5), refit_all=True)
        base.update(overrides)
        return cls(**base)


def ensemble_nlpd(outputs: np.ndarray, counts: np.ndarray, y: np.ndarray) -> float:
    """NLPD (c = 1) of the mixture moments of the selected members on validation data."""
    w = counts / counts.sum()
    sel = counts > 0
    mean, sigma = weighted_moments(outputs[sel], w[sel])
    s2 = np.maximum(sigma, SIGMA_FLOOR) ** 2
    return float(np.mean((y - mean) ** 2 / (2 * s2) + np.log(s2)))


@dataclass
class GreedyResult:
    counts: np.ndarray  # multiplicity of each pool member
    scores: list[float]  # score after each accepted addition

    @property
    def unique(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.counts)]


def hde_greedy_select(pool_size: int, size: int, score_fn: Callable[[np.ndarray], float],
                      max_additions: int = 100) -> GreedyResult:
    """Greedy with-replacement selection over ``pool_size`` candidates.

    ``score_fn(counts)`` scores the ensemble given member multiplicities (lower
    is better).  ``max_additions`` only guards against endless tiny gains.
    """
    if pool_size < 1:
        raise ValueError("pool is empty")
    counts = np.zeros(pool_size, dtype=int)
    best = math.inf
    scores: list[float] = []
    for _ in range(max_additions):
        full = np.count_nonzero(counts) >= size
        cand_scores = []
        for j in range(pool_size):
            if full and counts[j] == 0:
                continue
            trial = counts.copy()
            trial[j] += 1
            cand_scores.append((score_fn(trial), j))
        s, j = min(cand_scores)
        if not s < best:
            break
        counts[j] += 1
        best = s
        scores.append(s)
    return GreedyResult(counts, scores)


def split_indices(n: int, train_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = stream(seed, "hde-split").permutation(n)
    n_tr = int(math.floor(train_frac * n))
    return np.sort(perm[:n_tr]), np.sort(perm[n_tr:])


def _log_uniform(rng, lo, hi) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


@dataclass
class HdeBuild:
    ensemble: DeepEnsemble
    stage1: GreedyResult
    stage2: GreedyResult
    n_pool: int
    n_stratified: int


def hde_build(train: Dataset, cfg: HdeConfig, seed: int, config: TrainConfig | None = None) -> HdeBuild:
    """Random search, greedy select, stratify survivors over init seeds, greedy select again."""
    n = len(train)
    if n < 5:
        raise ValueError("hyper ensembles need at least 5 training points for the split")
    config = config or TrainConfig()
    tr_idx, va_idx = split_indices(n, cfg.train_frac, seed)
    fit, val = train.subset(tr_idx), train.subset(va_idx)
    n_fit = len(fit)
    rng = stream(seed, "hde-search")

    def make(draw: int, drop: float, l2_raw: float, init_seed: int) -> Member:
        l2 = l2_raw * (1.0 - drop) / n_fit
        try:
            return train_member(fit, cfg.widths, l2, replace(config, seed=init_seed), init_seed, drop)
        except TrainingDivergedError as exc:
            raise HdeTrainingError(draw, init_seed, exc) from exc

    def select(members: Sequence[Member]) -> GreedyResult:
        outs = np.stack([m.predict_mean(val.x) for m in members])
        return hde_greedy_select(len(members), cfg.size, lambda c: ensemble_nlpd(outs, c, val.y))

    fixed_init = derive_seed(seed, "hde-init", 0)
    l2_lo = cfg.l2_base * 10.0 ** (-cfg.l2_decades)
    l2_hi = cfg.l2_base * 10.0 ** cfg.l2_decades
    hypers, pool = [], []
    for k in range(cfg.search):
        drop = _log_uniform(rng, *cfg.drop_range)
        l2_raw = _log_uniform(rng, l2_lo, l2_hi)
        hypers.append((drop, l2_raw))
        pool.append(make(k, drop, l2_raw, fixed_init))
    stage1 = select(pool)

    strat = []
    for k in stage1.unique:
        drop, l2_raw = hypers[k]
        for m in range(cfg.size):
            strat.append(make(k, drop, l2_raw, derive_seed(seed, "hde-init", m)))
    stage2 = select(strat)

    chosen = stage2.unique
    members = [strat[i] for i in chosen]
    if cfg.refit_all:
        members = [_refit(train, strat[i], n_fit, config, cfg) for i in chosen]
    weights = stage2.counts[chosen].astype(float)
    return HdeBuild(DeepEnsemble(members, weights), stage1, stage2, len(pool), len(strat))


def _refit(train: Dataset, member: Member, n_fit: int, config: TrainConfig, cfg: HdeConfig) -> Member:
    """Continue training on every point with L2 rescaled by ``floor(frac n) / n``."""
    l2 = member.l2 * n_fit / len(train)
    return train_member(train, cfg.widths, l2, replace(config, seed=member.seed), member.seed,
                        member.drop_prob, init=member.net)
