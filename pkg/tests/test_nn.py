import json

import numpy as np
import pytest

from nomu import autodiff as ad
from nomu.network import (
    BoundNetwork,
    DenseNetwork,
    DropoutMask,
    NetworkSpec,
    forward,
    gradient,
    init_params,
    value_and_gradients,
)
from nomu.rng import derive_seed, stream
from nomu.training import TrainConfig, TrainingDivergedError, mse_loss, train_adam


def finite_difference(fn, params, h=1e-5):
    g = np.zeros_like(params)
    for i in range(len(params)):
        p = params.copy()
        p[i] += h
        up = fn(p)
        p[i] -= 2 * h
        g[i] = (up - fn(p)) / (2 * h)
    return g


class TestNetworkSpec:
    def test_param_count(self):
        spec = NetworkSpec(3, (4, 5), 2)
        assert spec.n_params == 3 * 4 + 4 + 4 * 5 + 5 + 5 * 2 + 2

    def test_rejects_bad_widths(self):
        with pytest.raises(ValueError):
            NetworkSpec(1, (0,), 1)
        with pytest.raises(ValueError):
            NetworkSpec(1, (2,), 1, init_range=0.0)

    def test_layer_major_layout(self):
        spec = NetworkSpec(2, (3,), 1)
        net = DenseNetwork(spec, np.arange(spec.n_params, dtype=float))
        (w1, b1), (w2, b2) = net.layers()
        np.testing.assert_array_equal(w1, np.arange(6).reshape(2, 3))
        np.testing.assert_array_equal(b1, [6, 7, 8])
        np.testing.assert_array_equal(w2[:, 0], [9, 10, 11])
        np.testing.assert_array_equal(b2, [12])


class TestInitParams:
    def test_range(self):
        net = init_params(NetworkSpec(1, (2,), 1), 7)
        assert net.params.shape == (7,)
        assert np.all(np.abs(net.params) <= 0.05)

    def test_deterministic(self):
        spec = NetworkSpec(2, (8, 8), 1)
        a, b = init_params(spec, 7), init_params(spec, 7)
        assert a.params.tobytes() == b.params.tobytes()

    def test_seeds_differ(self):
        spec = NetworkSpec(1, (2,), 1)
        assert np.any(init_params(spec, 7).params != init_params(spec, 8).params)


class TestForward:
    def test_zero_weights_give_bias(self):
        spec = NetworkSpec(2, (3,), 2)
        p = np.zeros(spec.n_params)
        p[-2:] = [0.5, -1.5]
        out = forward(DenseNetwork(spec, p), np.ones((4, 2)))
        np.testing.assert_array_equal(out, np.tile([0.5, -1.5], (4, 1)))

    def test_identity_single_layer(self):
        spec = NetworkSpec(3, (), 3)
        p = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
        x = np.array([[0.3, -2.0, 5.0]])
        np.testing.assert_array_equal(forward(DenseNetwork(spec, p), x), x)

    def test_negative_preactivation_is_cut(self):
        spec = NetworkSpec(1, (1,), 1)
        # w1 = 1, b1 = -2, w2 = 3, b2 = 0.25: x = 1 gives preactivation -1
        net = DenseNetwork(spec, np.array([1.0, -2.0, 3.0, 0.25]))
        assert forward(net, np.array([[1.0]]))[0, 0] == 0.25

    def test_single_vector_input(self):
        net = init_params(NetworkSpec(2, (4,), 1), 0)
        np.testing.assert_array_equal(net.forward(np.array([0.1, 0.2])), net.forward(np.array([[0.1, 0.2]]))[0])

    def test_dimension_mismatch(self):
        net = init_params(NetworkSpec(2, (4,), 1), 0)
        with pytest.raises(ValueError):
            net.forward(np.ones((3, 3)))

    def test_pure(self):
        net = init_params(NetworkSpec(2, (4, 4), 1), 1)
        x = np.random.default_rng(0).uniform(-1, 1, (5, 2))
        assert net.forward(x).tobytes() == net.forward(x).tobytes()

    def test_masked_units_contribute_nothing(self):
        spec = NetworkSpec(1, (3,), 1)
        net = init_params(spec, 3)
        mask = DropoutMask([np.array([True, False, True])], 0.5)
        p = net.params.copy()
        (ws, _, _), (w2s, _, _) = spec.layer_slices()
        p[w2s.start + 1] = 100.0  # weight out of the dropped unit
        x = np.array([[0.4]])
        np.testing.assert_allclose(DenseNetwork(spec, p).forward(x, mask), net.forward(x, mask))

    def test_mask_shape_checked(self):
        net = init_params(NetworkSpec(1, (3,), 1), 0)
        with pytest.raises(ValueError):
            net.forward(np.zeros((1, 1)), DropoutMask([np.ones(4, bool)], 0.5))


class TestGradient:
    def test_squared_norm(self):
        net = init_params(NetworkSpec(2, (3,), 1), 4)
        g = gradient(lambda b: b.sq_norm(), net)
        np.testing.assert_allclose(g, 2 * net.params, rtol=1e-14)

    def test_matches_central_differences(self):
        rng = np.random.default_rng(11)
        spec = NetworkSpec(2, (5, 4), 1)
        net = init_params(spec, 5)
        net.params *= 20  # leave the near-linear regime
        x = rng.uniform(-1, 1, (6, 2))
        y = rng.normal(size=(6, 1))

        def loss(b):
            return ad.sum(ad.square(ad.sub(b.forward(x), y)))

        def numeric(p):
            return float(np.sum((DenseNetwork(spec, p).forward(x) - y) ** 2))

        g = gradient(loss, net)
        fd = finite_difference(numeric, net.params)
        assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-4

    def test_stop_gradient_blocks_upstream(self):
        net = init_params(NetworkSpec(1, (3,), 1), 2)
        x = np.array([[0.5], [-0.5]])
        g = gradient(lambda b: ad.sum(ad.square(ad.stop_gradient(b.forward(x)))), net)
        assert np.all(g == 0)

    def test_relu_subgradient_zero(self):
        x = ad.Tensor(np.array([0.0, 1.0]), requires_grad=True)
        ad.sum(ad.relu(x)).backward()
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])

    def test_unsupported_primitive(self):
        t = ad.Tensor(np.array([0.5]), requires_grad=True)
        with pytest.raises(ad.UnsupportedPrimitiveError):
            np.sin(t)

    def test_frozen_network_gets_no_gradient(self):
        a = init_params(NetworkSpec(1, (2,), 1), 0)
        b = init_params(NetworkSpec(1, (2,), 1), 1)
        x = np.array([[0.3]])
        _, grads = value_and_gradients(lambda fa, fb: ad.sum(ad.add(fa.forward(x), fb.forward(x))),
                                       [a, b], [False, True])
        assert grads[0] is None
        assert np.any(grads[1] != 0)


class TestSerialization:
    def test_round_trip_lossless(self):
        net = init_params(NetworkSpec(3, (7, 2), 2), 9)
        back = DenseNetwork.loads(net.dumps())
        assert back.spec == net.spec
        assert back.params.tobytes() == net.params.tobytes()

    def test_rejects_unknown_version(self):
        d = init_params(NetworkSpec(1, (2,), 1), 0).to_dict()
        d["version"] = 99
        with pytest.raises(ValueError):
            DenseNetwork.from_dict(json.loads(json.dumps(d)))


class TestRng:
    def test_streams_are_label_separated(self):
        a = stream(1, "points", "train").random(4)
        b = stream(1, "points", "validation").random(4)
        assert np.all(a != b)
        np.testing.assert_array_equal(a, stream(1, "points", "train").random(4))

    def test_derive_seed_is_stable(self):
        assert derive_seed(3, "x", 1) == derive_seed(3, "x", 1)
        assert derive_seed(3, "x", 1) != derive_seed(3, "x", 2)
        assert 0 <= derive_seed(3, "x") < 2**63


class TestTrainAdam:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.x = rng.uniform(-1, 1, (10, 1))
        self.y = 2 * self.x[:, 0]

    def test_fits_a_line(self):
        net0 = init_params(NetworkSpec(1, (16,), 1), 0)
        res = train_adam(net0, mse_loss(self.x, self.y), TrainConfig(epochs=2**10, l2_lambda=1e-8))
        mse = np.mean((res.net.forward(self.x)[:, 0] - self.y) ** 2)
        assert mse < 1e-3

    def test_large_penalty_shrinks_weights(self):
        net0 = init_params(NetworkSpec(1, (16,), 1), 0)
        res = train_adam(net0, mse_loss(self.x, self.y), TrainConfig(epochs=2**10, l2_lambda=1e6))
        assert np.linalg.norm(res.net.params) < 0.01 * np.linalg.norm(net0.params)

    def test_keep_best_is_minimum(self):
        net0 = init_params(NetworkSpec(1, (16,), 1), 0)
        res = train_adam(net0, mse_loss(self.x, self.y), TrainConfig(epochs=200, learning_rate=0.05))
        assert res.best_loss == res.history.min()
        assert res.best_loss <= res.history[-1]

    def test_does_not_mutate_input(self):
        net0 = init_params(NetworkSpec(1, (4,), 1), 0)
        before = net0.params.copy()
        train_adam(net0, mse_loss(self.x, self.y), TrainConfig(epochs=5))
        np.testing.assert_array_equal(net0.params, before)

    def test_deterministic(self):
        net0 = init_params(NetworkSpec(1, (8,), 1), 0)
        cfg = TrainConfig(epochs=50, seed=3)
        a = train_adam(net0, mse_loss(self.x, self.y), cfg).net
        b = train_adam(net0, mse_loss(self.x, self.y), cfg).net
        assert a.params.tobytes() == b.params.tobytes()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_epoch(self):
        net0 = init_params(NetworkSpec(1, (4,), 1), 0)

        def bad(bound, rng):
            return ad.mul(ad.sum(bound[0].forward(self.x)), np.inf)

        with pytest.raises(TrainingDivergedError, match="epoch 0"):
            train_adam(net0, bad, TrainConfig(epochs=3))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        cfg = TrainConfig(epochs=7, seed=2)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_bound_network_matches_numpy_forward(self):
        net = init_params(NetworkSpec(2, (5, 3), 1), 1)
        x = np.random.default_rng(1).uniform(-1, 1, (4, 2))
        np.testing.assert_allclose(BoundNetwork(net).forward(x).value, net.forward(x), rtol=1e-15)
