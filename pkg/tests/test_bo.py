import math

import numpy as np
import pytest

from nomu.bo import (
    BoConfig,
    BoState,
    DegenerateEstimatorError,
    aggregate_regrets,
    delta_schedule,
    maximise_ucb,
    mw_scale,
    propose_next,
    run_bo,
    states_by_key,
)
from nomu.rng import stream
from nomu.testbed import bo_function

FAST = BoConfig(n_init=4, n_steps=6, restarts=20, local_steps=40)


class Synthetic:
    """Closed-form mean and sigma over [-1, 1]^d from callables of x."""

    def __init__(self, mean_fn, sigma_fn):
        self.mean_fn, self.sigma_fn = mean_fn, sigma_fn

    def predict(self, x):
        x = np.atleast_2d(x)
        return self.mean_fn(x), self.sigma_fn(x)


def bump(center, width):
    return lambda x: np.exp(-np.sum((x - center) ** 2, axis=1) / width**2)


class TestDeltaSchedule:
    def test_endpoints(self):
        assert delta_schedule(8) == 0.0625
        assert delta_schedule(72) == 0.01

    def test_midpoint_is_geometric_mean(self):
        assert delta_schedule(40) == pytest.approx(0.025, abs=1e-15)

    def test_strictly_decreasing(self):
        v = [delta_schedule(i) for i in range(8, 73)]
        assert all(b < a for a, b in zip(v, v[1:]))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            delta_schedule(7)
        with pytest.raises(ValueError):
            delta_schedule(73)

    def test_config_end(self):
        assert BoConfig().n_end == 72
        with pytest.raises(ValueError):
            BoConfig(delta_start=0.01, delta_end=0.02)


class TestMwScale:
    def test_unit_sigma(self):
        est = Synthetic(lambda x: np.zeros(len(x)), lambda x: np.ones(len(x)))
        assert mw_scale(est, 0.5, np.zeros((10, 1))) == 0.25

    def test_linear_in_target(self):
        est = Synthetic(lambda x: np.zeros(len(x)), lambda x: 0.1 + np.abs(x[:, 0]))
        probe = stream(0, "probe").uniform(-1, 1, (2048, 1))
        c1, c2 = mw_scale(est, 0.5, probe), mw_scale(est, 1.0, probe)
        assert c2 == pytest.approx(2 * c1, rel=1e-15)
        _, s = est.predict(probe)
        assert np.mean(2 * c1 * s) == pytest.approx(0.5, abs=1e-9)

    def test_degenerate(self):
        est = Synthetic(lambda x: np.zeros(len(x)), lambda x: np.zeros(len(x)))
        with pytest.raises(DegenerateEstimatorError):
            mw_scale(est, 0.5, np.zeros((4, 1)))


class TestProposeNext:
    cfg = BoConfig(restarts=30, local_steps=80)

    def test_zero_sigma_exhausts_doublings(self):
        est = Synthetic(lambda x: -np.sum((x - 0.3) ** 2, axis=1), lambda x: np.zeros(len(x)))
        obs = np.array([[0.3]])
        prop = propose_next(obs, est, 0.1, 0.05, self.cfg, rng_seed=0)
        assert not prop.accepted and prop.doublings == 15
        assert prop.c == 0.1 * 2.0**15
        assert prop.x[0] == pytest.approx(0.3, abs=1e-3)

    def test_far_sigma_needs_no_doubling(self):
        est = Synthetic(lambda x: np.zeros(len(x)), lambda x: 5 * bump(np.array([-0.7, 0.6]), 0.2)(x))
        obs = np.array([[0.5, 0.5], [0.0, -0.5]])
        prop = propose_next(obs, est, 1.0, 0.05, self.cfg, rng_seed=1)
        assert prop.doublings == 0 and prop.accepted
        np.testing.assert_allclose(prop.x, [-0.7, 0.6], atol=1e-3)

    def test_doubling_moves_to_sigma_peak(self):
        mean_fn = bump(np.array([0.0]), 0.2)
        sigma_fn = lambda x: 0.05 + bump(np.array([0.8]), 0.1)(x)
        est = Synthetic(mean_fn, sigma_fn)
        c0, delta = 0.05, 0.1
        # dense grid oracle: first k whose argmax is farther than delta from x = 0
        grid = np.linspace(-1, 1, 200001)[:, None]
        k_ref = next(k for k in range(16)
                     if abs(grid[np.argmax(mean_fn(grid) + c0 * 2**k * sigma_fn(grid)), 0]) > delta)
        x_ref = grid[np.argmax(mean_fn(grid) + c0 * 2**k_ref * sigma_fn(grid)), 0]
        prop = propose_next(np.array([[0.0]]), est, c0, delta, self.cfg, rng_seed=2)
        assert k_ref > 0 and prop.doublings == k_ref
        assert prop.c == c0 * 2.0**k_ref
        assert prop.x[0] == pytest.approx(x_ref, abs=1e-3)
        assert abs(prop.x[0] - 0.8) < 0.1

    def test_stays_in_box(self):
        est = Synthetic(lambda x: np.sum(x, axis=1) * 10, lambda x: np.ones(len(x)))
        for seed in range(5):
            x, _ = maximise_ucb(est, 1.0, 3, np.random.default_rng(seed), 10, 30)
            assert np.all(np.abs(x) <= 1.0)
            np.testing.assert_allclose(x, 1.0)

    def test_static_mode_takes_first_argmax(self):
        est = Synthetic(lambda x: -np.sum(x**2, axis=1), lambda x: np.zeros(len(x)))
        prop = propose_next(np.array([[0.0]]), est, 1.0, 0.5, self.cfg, rng_seed=0, dynamic=False)
        assert prop.doublings == 0 and prop.c == 1.0


class TestRunBo:
    def test_rand_trace(self):
        state = run_bo(bo_function("Levy", 2), "RAND", FAST, seed=3)
        trace = state.regret_trace
        assert len(trace) == FAST.n_steps + 1
        assert np.all(np.diff(trace) <= 0)
        assert np.all((trace >= 0) & (trace <= 2))
        assert state.final_regret == pytest.approx(bo_function("Levy", 2).max_value - state.best)

    def test_deterministic(self):
        f = bo_function("Levy", 2)
        for alg in ("RAND", "GP"):
            a = run_bo(f, alg, FAST, seed=5).to_csv()
            b = run_bo(f, alg, FAST, seed=5).to_csv()
            assert a == b

    def test_shared_initial_design(self):
        f = bo_function("Levy", 2)
        a = run_bo(f, "RAND", FAST, seed=1, data_seed=9)
        b = run_bo(f, "GP", FAST, seed=2, data_seed=9)
        np.testing.assert_array_equal(a.x[:4], b.x[:4])

    def test_gp_uses_mw_scaling(self):
        state = run_bo(bo_function("Levy", 2), "GP", FAST, seed=0)
        assert state.c0 > 0
        for s in state.log[1:]:
            assert s.c == state.c0 * 2.0**s.doublings

    def test_plain_gp_uses_unit_c(self):
        state = run_bo(bo_function("Levy", 2), "pGP", FAST, seed=0)
        assert math.isnan(state.c0)
        assert all(s.c == 1.0 and s.doublings == 0 for s in state.log[1:])

    def test_csv_round_trip(self):
        state = run_bo(bo_function("Levy", 2), "RAND", FAST, seed=4)
        rows = BoState.read_csv(state.to_csv())
        assert [r["step"] for r in rows] == list(range(FAST.n_steps + 1))
        assert [r["regret"] for r in rows] == list(state.regret_trace)
        assert rows[1]["x0"] == state.x[FAST.n_init, 0]

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            run_bo(bo_function("Levy", 2), "SVM", FAST, seed=0)

    def test_aggregate(self):
        states = [run_bo(bo_function("Levy", 2), "RAND", FAST, seed=s) for s in range(3)]
        agg = aggregate_regrets(states_by_key(states))
        entry = agg["Levy2D"]
        assert entry["dim"] == 2
        cell = entry["RAND"]["0.5"]
        v = np.array([s.final_regret for s in states])
        assert cell["n"] == 3
        assert cell["mean"] == pytest.approx(v.mean())
        assert cell["ci"] == pytest.approx(1.96 * v.std(ddof=1) / math.sqrt(3))
