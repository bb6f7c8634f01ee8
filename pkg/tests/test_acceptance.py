"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from nomu import autodiff as ad
from nomu.algorithms import Recipe, fit_estimator
from nomu.baselines import HdeConfig, gp_fit, hde_build
from nomu.bo import BoConfig, delta_schedule, run_bo
from nomu.data import Dataset
from nomu.experiment import cell_seed, data_seed
from nomu.metrics import auc, auc_trapezoid, coverage_probability, evaluate, mean_width, min_nlpd
from nomu.model import NomuHyperparams, attach_to_pretrained, default_specs, readout, readout_linearized
from nomu.network import DenseNetwork, NetworkSpec, gradient, init_params
from nomu.testbed import BATTERY_1D, bo_function, get, regression_sets
from nomu.training import TrainConfig, mse_loss, train_adam

pytestmark = pytest.mark.slow

MASTER = 0
RUNS = 20
HP = NomuHyperparams.regression(1)
GRID = np.linspace(-1, 1, 1001)[:, None]


def conclude(number, passed):
    if not passed:
        pytest.fail(f"criterion {number} not met")


def largest_gap_midpoint(x):
    xs = np.sort(x[:, 0])
    k = int(np.argmax(np.diff(xs)))
    return 0.5 * (xs[k] + xs[k + 1])


@pytest.fixture(scope="module")
def battery():
    """NOMU and MCDO on the 1D battery: 8 training and 100 validation points per run."""
    recipe = Recipe.desk("regression")
    out = {}
    for fn in BATTERY_1D:
        for run in range(RUNS):
            train, val = regression_sets(get(fn), data_seed(MASTER, fn, run), 8, 100)
            row = {"train": train}
            for alg in ("NOMU", "MCDO"):
                t0 = time.time()
                est = fit_estimator(alg, train, cell_seed(MASTER, alg, fn, run), recipe)
                res = {"metrics": evaluate(est, val), "seconds": time.time() - t0}
                if alg == "NOMU":
                    res["sigma_train"] = est.predict(train.x)[1]
                    res["sigma_gap"] = est.predict(np.array([[largest_gap_midpoint(train.x)]]))[1][0]
                    res["sigma_min_seen"] = min(est.predict(GRID)[1].min(), est.predict(val.x)[1].min(),
                                                res["sigma_train"].min())
                row[alg] = res
            out[(fn, run)] = row
    return out


class TestAcceptance:
    def test_01_readout(self, verdict):
        z = np.linspace(-10, 10, 1000)
        smin, smax = HP.sigma_min, HP.sigma_max
        oracle = np.array([smax * (1 - math.exp(-(max(0.0, v) + smin) / smax)) for v in z])
        err = float(np.max(np.abs(readout(z, smin, smax) - oracle)))
        lin = readout_linearized(z, smin, smax)
        clamp_ok = bool(np.all(lin == np.clip(z, smin, smax)))
        passed = verdict(1, "readout exactness", err < 1e-12 and clamp_ok,
                         f"max err {err:.1e}, clamp exact {clamp_ok}")
        conclude(1, passed)

    def test_02_gradients(self, verdict):
        rng = np.random.default_rng(0)
        worst = 0.0
        for k in range(50):
            d = int(rng.integers(1, 4))
            widths = tuple(int(w) for w in rng.integers(2, 7, size=rng.integers(1, 3)))
            spec = NetworkSpec(d, widths, 1)
            net = init_params(spec, k)
            net.params *= 20
            x = rng.uniform(-1, 1, (5, d))
            y = rng.normal(size=(5, 1))

            def loss(b):
                return ad.sum(ad.square(ad.sub(b.forward(x), y)))

            def numeric(p):
                return float(np.sum((DenseNetwork(spec, p).forward(x) - y) ** 2))

            g = gradient(loss, net)
            fd = np.zeros_like(g)
            for i in range(len(g)):
                p = net.params.copy()
                p[i] += 1e-5
                up = numeric(p)
                p[i] -= 2e-5
                fd[i] = (up - numeric(p)) / 2e-5
            worst = max(worst, float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)))
        conclude(2, verdict(2, "gradient correctness (50 networks)", worst < 1e-4, f"max rel err {worst:.1e}"))

    def test_03_gp_oracle(self, verdict):
        worst, in_range = 0.0, True
        for n in (1, 2, 3, 5):
            for d in (1, 2):
                rng = np.random.default_rng(10 * n + d)
                x, y = rng.uniform(-1, 1, (n, d)), rng.normal(size=n)
                m = gp_fit(Dataset(x, y), seed=n)
                xs = rng.uniform(-1, 1, (50, d))
                k = lambda a, b: m.kappa * np.exp(-((a[:, None] - b[None]) ** 2).sum(-1) / m.h**2)
                inv = np.linalg.inv(k(x, x) + m.noise * np.eye(n))
                mean_ref = k(xs, x) @ inv @ y
                var_ref = m.kappa - np.einsum("ij,jk,ik->i", k(xs, x), inv, k(xs, x))
                mean, sigma = m.predict(xs)
                worst = max(worst, np.max(np.abs(mean - mean_ref)), np.max(np.abs(sigma**2 - var_ref)))
                in_range &= bool(np.all(sigma**2 >= 0) and np.all(sigma**2 <= m.kappa))
        conclude(3, verdict(3, "GP dense-inverse equivalence", worst < 1e-8 and in_range,
                            f"max err {worst:.1e}, var in [0, kappa] {in_range}"))

    def test_04_sigma_nonnegative(self, battery, verdict):
        lowest = min(row["NOMU"]["sigma_min_seen"] for row in battery.values())
        conclude(4, verdict(4, "NOMU sigma >= 0 in every run", lowest >= 0.0,
                            f"lowest sigma {lowest:.3e} over {len(battery)} runs"))

    def test_05_in_sample_sigma(self, battery, verdict):
        limit = 10 * HP.sigma_min
        shares = {fn: np.mean([battery[(fn, r)]["NOMU"]["sigma_train"].max() <= limit for r in range(RUNS)])
                  for fn in BATTERY_1D}
        worst_fn = min(shares, key=shares.get)
        med = np.median([battery[k]["NOMU"]["sigma_train"].max() for k in battery])
        passed = all(s >= 0.9 for s in shares.values())
        conclude(5, verdict(5, "in-sample sigma <= 10 sigma_min in >= 90% of runs per function", passed,
                            f"lowest share {shares[worst_fn]:.2f} ({worst_fn}), median max in-sample sigma {med:.2e}"))

    def test_06_gap_sigma(self, battery, verdict):
        ok = {fn: np.mean([battery[(fn, r)]["NOMU"]["sigma_gap"] > 5 * battery[(fn, r)]["NOMU"]["sigma_train"].mean()
                           for r in range(RUNS)]) for fn in BATTERY_1D}
        worst_fn = min(ok, key=ok.get)
        pooled = float(np.mean(list(ok.values())))
        conclude(6, verdict(6, "gap-midpoint sigma > 5x mean in-sample sigma in >= 90% of runs", pooled >= 0.9,
                            f"share {pooled:.2f} over {len(battery)} runs, lowest per function "
                            f"{ok[worst_fn]:.2f} ({worst_fn})"))

    def test_07_more_data_less_sigma(self, verdict):
        recipe = Recipe.desk("regression")
        f = get("Sine3")
        ratios, avg8, avg128 = [], [], []
        for run in range(10):
            avgs = []
            for n in (8, 128):
                train, _ = regression_sets(f, data_seed(MASTER, "Sine3", run), n, 1)
                est = fit_estimator("NOMU", train, cell_seed(MASTER, "NOMU", f"Sine3-n{n}", run), recipe)
                avgs.append(float(est.predict(GRID)[1].mean()))
            avg8.append(avgs[0])
            avg128.append(avgs[1])
            ratios.append(avgs[1] / avgs[0])
        med = float(np.median(ratios))
        conclude(7, verdict(7, "8 -> 128 points halves domain-average sigma (median of 10 seeds)", med <= 0.5,
                            f"median ratio {med:.3f}, medians {np.median(avg8):.3e} -> {np.median(avg128):.3e}"))

    def test_08_regression_ordering(self, battery, verdict):
        med = {(alg, m): float(np.median([row[alg]["metrics"][m] for row in battery.values()]))
               for alg in ("NOMU", "MCDO") for m in ("auc", "mnlpd")}
        passed = med[("NOMU", "auc")] < med[("MCDO", "auc")] and med[("NOMU", "mnlpd")] < med[("MCDO", "mnlpd")]
        conclude(8, verdict(8, "NOMU pooled median AUC and MNLPD below MCDO (10 functions x 20 runs)", passed,
                            f"AUC {med[('NOMU', 'auc')]:.3f} vs {med[('MCDO', 'auc')]:.3f}, "
                            f"MNLPD {med[('NOMU', 'mnlpd')]:.3f} vs {med[('MCDO', 'mnlpd')]:.3f}"))

    def test_09_metric_hand_values(self, verdict):
        checks = {
            "cp": coverage_probability([0.5, 2.0, -0.5, -2.0], np.zeros(4), np.ones(4), 1.0) == 0.5,
            "mw": abs(mean_width([0.5, 1.5], 1.0) - 2.0) < 1e-12,
            "auc": abs(auc([1.0, -1.0, 2.0], np.zeros(3), np.ones(3)) - 8 / 3) < 1e-12,
            "mnlpd": abs(min_nlpd([1.0], [0.0], [1.0]).value - (1 + math.log(0.5))) < 1e-6,
        }
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(5, 60))
            y, m, s = rng.normal(size=n), rng.normal(size=n), rng.uniform(0.05, 2, n)
            exact = auc(y, m, s)
            worst = max(worst, abs(auc_trapezoid(y, m, s) - exact) / exact)
        checks["trapezoid"] = worst < 1e-3
        failed = [k for k, v in checks.items() if not v]
        conclude(9, verdict(9, "metric hand values", not failed,
                            f"trapezoid max rel diff {worst:.1e}" + (f", failed {failed}" if failed else "")))

    def test_10_delta_schedule(self, verdict):
        v = [delta_schedule(i) for i in range(8, 73)]
        passed = v[0] == 0.0625 and v[-1] == 0.01 and all(b < a for a, b in zip(v, v[1:]))
        conclude(10, verdict(10, "dynamic-c delta schedule", passed, f"delta(8)={v[0]}, delta(72)={v[-1]}"))

    def test_11_bo_levy5d(self, verdict):
        f = bo_function("Levy", 5)
        cfg = BoConfig(n_init=8, n_steps=32, mw_target=0.5)
        recipe = Recipe.desk("bo")
        t0 = time.time()
        regrets = {alg: [run_bo(f, alg, cfg, seed, recipe).final_regret for seed in range(5)]
                   for alg in ("NOMU", "RAND")}
        nomu, rand = np.mean(regrets["NOMU"]), np.mean(regrets["RAND"])
        conclude(11, verdict(11, "BO Levy5D: NOMU mean final regret < RAND (5 seeds, 8+32)", nomu < rand,
                             f"NOMU {nomu:.4f} vs RAND {rand:.4f}, {time.time() - t0:.0f} s"))

    def test_12_stop_gradient(self, verdict):
        x = np.linspace(-0.5, 0.5, 6)[:, None]
        train = Dataset(x, 0.8 * x[:, 0] - 0.1)
        fs, rs = default_specs(1, 64)
        f_net = train_adam(init_params(fs, 0), mse_loss(train.x, train.y), TrainConfig(epochs=300, seed=1)).net
        before = f_net.params.tobytes()
        model = attach_to_pretrained(f_net, train, HP, rs, TrainConfig(epochs=2**10, seed=2))
        passed = model.f_net.params.tobytes() == before and f_net.params.tobytes() == before
        conclude(12, verdict(12, "stop-gradient: frozen f-network bitwise unchanged", passed))

    def test_13_hde_structure(self, verdict):
        train, _ = regression_sets(get("Sine1"), 0, 8, 1)
        cfg = HdeConfig(size=5, search=20, widths=(32, 128, 64))
        build = hde_build(train, cfg, 0, TrainConfig(epochs=2**10))
        s1, s2 = build.stage1.scores, build.stage2.scores
        improving = all(b < a for a, b in zip(s1, s1[1:])) and all(b < a for a, b in zip(s2, s2[1:]))
        members = len(build.ensemble.members)
        conclude(13, verdict(13, "HDE: strictly improving greedy scores, <= M unique members, 8-point build",
                             improving and members <= cfg.size,
                             f"{members} members, stage scores {len(s1)} and {len(s2)} steps"))
