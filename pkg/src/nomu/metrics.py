"""Quality measures for calibrated uncertainty bounds.

All measures take validation targets ``y``, predicted means and sigmas.  The
bounds at calibration ``c`` are ``mean -/+ c * sigma``; coverage uses the
closed interval.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Dataset
from .estimator import UncertaintyEstimator

UNBOUNDED_BELOW = -math.inf


class UncoverablePointError(ValueError):
    def __init__(self, index: int):
        super().__init__(f"uncoverable point {index}: zero sigma with a nonzero residual")
        self.index = index


class DegenerateDensityError(ValueError):
    pass


def _arrays(y, mean, sigma):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise ValueError("validation set is empty")
    if not (len(y) == len(mean) == len(sigma)):
        raise ValueError("y, mean and sigma must have equal lengths")
    return y, mean, sigma


def coverage_probability(y, mean, sigma, c: float) -> float:
    y, mean, sigma = _arrays(y, mean, sigma)
    return float(np.mean(np.abs(y - mean) <= c * sigma))


def mean_width(sigma, c: float) -> float:
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    if len(sigma) == 0:
        raise ValueError("validation set is empty")
    return float(np.mean(2.0 * c * sigma))


def required_c(y, mean, sigma) -> np.ndarray:
    """Smallest c covering each point: ``|y - mean| / sigma`` (0 for exact hits)."""
    y, mean, sigma = _arrays(y, mean, sigma)
    resid = np.abs(y - mean)
    r = np.zeros_like(resid)
    pos = sigma > 0
    r[pos] = resid[pos] / sigma[pos]
    bad = np.flatnonzero(~pos & (resid > 0))
    if len(bad):
        raise UncoverablePointError(int(bad[0]))
    return r


def coverage_curve(y, mean, sigma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The jump points of CP(c): ``(c_jump, CP after the jump, MW at c_jump)``."""
    r = np.sort(required_c(y, mean, sigma))
    c_jump, counts = np.unique(r, return_counts=True)
    cp = np.cumsum(counts) / len(r)
    mw = 2.0 * c_jump * np.mean(np.asarray(sigma, dtype=np.float64))
    return c_jump, cp, mw


def auc(y, mean, sigma) -> float:
    """Area under MW as a function of CP, for c from 0 up to full coverage.

    CP(c) is a step function with jumps at the required-c values; MW is linear
    in c, so the integral is the exact sum of ``dCP * MW(c_jump)``.
    """
    c_jump, cp, mw = coverage_curve(y, mean, sigma)
    d_cp = np.diff(np.concatenate([[0.0], cp]))
    return float(np.sum(d_cp * mw))


def auc_trapezoid(y, mean, sigma, n_grid: int = 10**4) -> float:
    """Trapezoidal approximation on a uniform c-grid over ``[0, c*]``."""
    r = required_c(y, mean, sigma)
    grid = np.linspace(0.0, r.max(), n_grid)
    cp = np.mean(r[None, :] <= grid[:, None], axis=1)
    mw = 2.0 * grid * np.mean(sigma)
    return float(np.sum(np.diff(cp) * 0.5 * (mw[1:] + mw[:-1])))


def nlpd(y, mean, sigma, c: float) -> float:
    """Mean of ``e^2 / (2 (c sigma)^2) + ln((c sigma)^2)``."""
    y, mean, sigma = _arrays(y, mean, sigma)
    s2 = (c * sigma) ** 2
    if np.any(s2 <= 0):
        raise DegenerateDensityError("degenerate density: c * sigma is zero at some point")
    return float(np.mean((y - mean) ** 2 / (2 * s2) + np.log(s2)))


@dataclass(frozen=True)
class MnlpdResult:
    c: float
    value: float

    @property
    def unbounded(self) -> bool:
        return self.value == UNBOUNDED_BELOW


def golden_section(fn, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Minimiser of a unimodal ``fn`` on ``[lo, hi]``, to bracket width ``tol``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1, x2 = b - inv_phi * (b - a), a + inv_phi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while (b - a) > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = fn(x2)
    return 0.5 * (a + b)


def min_nlpd(y, mean, sigma, c_range: tuple[float, float] = (1e-6, 1e6)) -> MnlpdResult:
    """Minimum of NLPD over c by golden-section search in ``log c``."""
    y, mean, sigma = _arrays(y, mean, sigma)
    if np.any(sigma <= 0):
        raise DegenerateDensityError("degenerate density: sigma is zero at some point")
    if np.all(y == mean):
        return MnlpdResult(0.0, UNBOUNDED_BELOW)
    log_c = golden_section(lambda t: nlpd(y, mean, sigma, math.exp(t)),
                           math.log(c_range[0]), math.log(c_range[1]))
    c = math.exp(log_c)
    return MnlpdResult(c, nlpd(y, mean, sigma, c))


# ---- wrappers on estimators ----------------------------------------------

@dataclass
class CalibratedPredictor:
    estimator: UncertaintyEstimator
    c: float = 1.0

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be >= 0")

    def coverage(self, val: Dataset) -> float:
        mean, sigma = self.estimator.predict(val.x)
        return coverage_probability(val.y, mean, sigma, self.c)

    def mean_width(self, val: Dataset) -> float:
        _, sigma = self.estimator.predict(val.x)
        return mean_width(sigma, self.c)

    def nlpd(self, val: Dataset) -> float:
        mean, sigma = self.estimator.predict(val.x)
        return nlpd(val.y, mean, sigma, self.c)


def evaluate(estimator: UncertaintyEstimator, val: Dataset) -> dict:
    """AUC and MNLPD of one fitted estimator on a validation set."""
    mean, sigma = estimator.predict(val.x)
    out = {"auc": auc(val.y, mean, sigma)}
    res = min_nlpd(val.y, mean, sigma)
    out["mnlpd"] = res.value
    out["mnlpd_c"] = res.c
    return out


# ---- aggregation ---------------------------------------------------------

def bootstrap_median_ci(samples, n_boot: int = 10**4, level: float = 0.95,
                        seed: int = 0) -> tuple[float, float, float]:
    """Median and percentile-bootstrap confidence interval of the median."""
    x = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    med = float(np.median(x))
    if x[0] == x[-1]:
        return med, med, med
    res = stats.bootstrap((x,), np.median, n_resamples=n_boot, confidence_level=level,
                          method="percentile", random_state=np.random.default_rng(seed))
    return med, float(res.confidence_interval.low), float(res.confidence_interval.high)


def dominance_ranks(cis: dict[str, tuple[float, float, float]]) -> dict[str, int]:
    """``1 + #{b : CI(b) lies entirely below CI(a)}`` for lower-is-better measures."""
    return {a: 1 + sum(1 for b, (_, _, hi_b) in cis.items() if b != a and hi_b < lo_a)
            for a, (_, lo_a, _) in cis.items()}


@dataclass
class MetricsReport:
    records: list[dict] = field(default_factory=list)

    def add(self, algorithm: str, function: str, run: int, measure: str, value: float) -> None:
        self.records.append({"algorithm": algorithm, "function": function, "run": int(run),
                             "measure": measure, "value": float(value)})

    def values(self, algorithm: str, measure: str, function: str | None = None) -> np.ndarray:
        return np.array([r["value"] for r in self.records
                         if r["algorithm"] == algorithm and r["measure"] == measure
                         and (function is None or r["function"] == function)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["algorithm", "function", "run", "measure", "value"], lineterminator="\n")
        w.writeheader()
        for r in sorted(self.records, key=lambda r: (r["algorithm"], r["function"], r["run"], r["measure"])):
            w.writerow({**r, "value": repr(r["value"])})
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MetricsReport":
        rep = cls()
        for row in csv.DictReader(io.StringIO(text)):
            rep.add(row["algorithm"], row["function"], int(row["run"]), row["measure"], float(row["value"]))
        return rep

    def aggregate(self, seed: int = 0, n_boot: int = 10**4) -> dict:
        """Median and bootstrap CI per (function, measure, algorithm), with ranks."""
        keys = sorted({(r["function"], r["measure"]) for r in self.records})
        algs = sorted({r["algorithm"] for r in self.records})
        out: dict = {}
        for fn, meas in keys:
            cis = {}
            for a in algs:
                v = self.values(a, meas, fn)
                v = v[np.isfinite(v)]
                if len(v) >= 2:
                    cis[a] = bootstrap_median_ci(v, n_boot, seed=seed)
                elif len(v) == 1:
                    cis[a] = (float(v[0]),) * 3
            ranks = dominance_ranks(cis)
            out.setdefault(fn, {})[meas] = {
                a: {"median": m, "lo": lo, "hi": hi, "rank": ranks[a]} for a, (m, lo, hi) in cis.items()}
        return out

    def to_json(self, seed: int = 0, n_boot: int = 10**4) -> str:
        return json.dumps(self.aggregate(seed, n_boot), indent=1, sort_keys=True)
