import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fadkit import nncore
from fadkit.errors import ConfigError, DivergenceError, ShapeError

from conftest import random_network
from oracles import fd_gradient, relative_error

# frozen with mpmath (60 digits): 1 * Phi(1), Phi via erf
GELU_AT_ONE = 0.8413447460685429


class TestGelu:
    def test_zero(self):
        assert nncore.gelu(0.0) == 0.0

    def test_saturates_high(self):
        assert nncore.gelu(10.0) == pytest.approx(10.0, abs=1e-9)

    def test_high_precision_oracle(self):
        import mpmath as mp

        mp.mp.dps = 50
        expected = float(mp.mpf(1) * mp.mpf("0.5") * (1 + mp.erf(1 / mp.sqrt(2))))
        assert expected == GELU_AT_ONE
        assert nncore.gelu(1.0) == pytest.approx(GELU_AT_ONE, abs=1e-10)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            nncore.gelu(float("nan"))
        with pytest.raises(ValueError):
            nncore.gelu(np.array([1.0, np.inf]))

    @given(st.floats(-6.0, 6.0))
    def test_reflection_identity(self, x):
        # x * Phi(x) - (-x) * Phi(-x) = x because Phi(x) + Phi(-x) = 1
        assert nncore.gelu(x) - nncore.gelu(-x) == pytest.approx(x, abs=1e-9)

    def test_monotone_on_nonnegative_grid(self):
        grid = np.linspace(0.0, 6.0, 601)
        values = nncore.gelu(grid)
        assert np.all(np.diff(values) >= 0)

    def test_negative_dip_is_bounded(self):
        # the curve dips to about -0.17 near x = -0.75, then returns to 0
        grid = np.linspace(-6.0, 0.0, 601)
        assert nncore.gelu(grid).min() > -0.18


class TestForward:
    def test_zero_parameters_give_uniform(self):
        net = nncore.DenseNetwork([(np.zeros((3, 4)), np.zeros(4))])
        probs = nncore.forward(net, np.array([0.3, -2.0, 5.0]))
        assert probs == pytest.approx(np.full(4, 0.25), abs=1e-12)

    def test_hand_softmax(self):
        # single linear layer producing logits (0, ln 3)
        net = nncore.DenseNetwork(
            [(np.array([[0.0, math.log(3.0)]]), np.zeros(2))]
        )
        probs = nncore.forward(net, np.array([1.0]))
        assert probs == pytest.approx([0.25, 0.75], abs=1e-12)

    def test_probabilities_sum_to_one(self, rng):
        for _ in range(20):
            net = random_network(rng)
            x = rng.normal(size=(7, net.input_dim))
            probs = nncore.forward(net, x)
            assert np.all(probs >= 0)
            assert np.abs(probs.sum(axis=1) - 1.0).max() <= 1e-9

    def test_dimension_mismatch(self, rng):
        net = random_network(rng, input_dim=4)
        with pytest.raises(ShapeError):
            nncore.forward(net, np.zeros(5))

    def test_deterministic(self, rng):
        net = random_network(rng)
        x = rng.normal(size=net.input_dim)
        assert np.array_equal(nncore.forward(net, x), nncore.forward(net, x))


class TestInputGradient:
    def test_linear_logit_gradient_is_weight_row(self):
        w = np.array([[2.0, -1.0], [0.5, 3.0], [1.0, 0.0]])
        net = nncore.DenseNetwork([(w, np.zeros(2))], gradient_target="logit")
        g = nncore.input_gradient(net, np.array([0.3, 0.7, -1.0]), 1)
        assert g == pytest.approx(w[:, 1], abs=1e-12)

    def test_constant_network_zero_gradient(self):
        net = nncore.DenseNetwork([(np.zeros((3, 2)), np.array([1.0, -1.0]))])
        g = nncore.input_gradient(net, np.array([1.0, 2.0, 3.0]), 0)
        assert np.array_equal(g, np.zeros(3))

    def test_invalid_class_index(self, rng):
        net = random_network(rng, classes=3)
        with pytest.raises(IndexError):
            nncore.input_gradient(net, np.zeros(net.input_dim), 3)

    @pytest.mark.parametrize("mode", ["probability", "logit"])
    def test_matches_finite_differences(self, rng, mode):
        for _ in range(10):
            net = random_network(rng)
            x = rng.normal(size=net.input_dim)
            target = int(rng.integers(net.class_count))

            def f(v):
                if mode == "probability":
                    return float(nncore.forward(net, v)[target])
                return float(nncore.logits(net, v)[target])

            analytic = nncore.input_gradient(net, x, target, target=mode)
            numeric = fd_gradient(f, x, step=1e-5)
            assert relative_error(analytic, numeric).max() <= 1e-4


class TestParameterGradients:
    def test_matches_finite_differences(self, rng):
        for _ in range(6):
            net = random_network(rng)
            X = rng.normal(size=(5, net.input_dim))
            y = rng.integers(net.class_count, size=5)
            _, grads = nncore._loss_and_param_grads(net, X, y)
            for k, (w, b) in enumerate(net.layers):
                for arr, g in ((w, grads[k][0]), (b, grads[k][1])):
                    flat = arr.reshape(-1)
                    picks = rng.choice(flat.size, size=min(5, flat.size),
                                       replace=False)
                    for j in picks:
                        orig = flat[j]
                        flat[j] = orig + 1e-5
                        hi = nncore.cross_entropy(net, X, y)
                        flat[j] = orig - 1e-5
                        lo = nncore.cross_entropy(net, X, y)
                        flat[j] = orig
                        numeric = (hi - lo) / 2e-5
                        err = relative_error(g.reshape(-1)[j], numeric)
                        assert float(err) <= 1e-4


class TestAdam:
    def config(self, **kw):
        return nncore.TrainConfig(**kw)

    def test_zero_gradient_leaves_parameters(self):
        net = nncore.init_network(2, (3,), 2, seed=0)
        before = [(w.copy(), b.copy()) for w, b in net.layers]
        state = nncore.AdamState.for_network(net)
        zeros = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers]
        nncore.adam_step(net, state, zeros, self.config())
        for (w0, b0), (w1, b1) in zip(before, net.layers):
            assert np.array_equal(w0, w1)
            assert np.array_equal(b0, b1)
        assert state.step == 1

    def test_first_step_hand_value(self):
        # scalar parameter at 0, gradient 1, lr 1e-3: bias correction gives
        # m_hat = v_hat = 1, so the step is lr / (1 + eps)
        net = nncore.DenseNetwork([(np.zeros((1, 2)), np.zeros(2))])
        state = nncore.AdamState.for_network(net)
        grads = [(np.array([[1.0, 0.0]]), np.zeros(2))]
        nncore.adam_step(net, state, grads, self.config())
        delta = -float(net.layers[0][0][0, 0])
        assert delta == pytest.approx(0.0009999999900000003, abs=1e-15)
        assert delta == pytest.approx(0.001, abs=1e-8)

    def test_two_identical_steps_follow_recurrence(self):
        net = nncore.DenseNetwork([(np.zeros((1, 2)), np.zeros(2))])
        state = nncore.AdamState.for_network(net)
        grads = [(np.array([[1.0, 0.0]]), np.zeros(2))]
        cfg = self.config()
        nncore.adam_step(net, state, grads, cfg)
        first = -float(net.layers[0][0][0, 0])
        nncore.adam_step(net, state, grads, cfg)
        assert state.step == 2
        # hand recurrence for the second update
        m = (1 - cfg.beta1) * (1 + cfg.beta1)
        v = (1 - cfg.beta2) * (1 + cfg.beta2)
        m_hat = m / (1 - cfg.beta1**2)
        v_hat = v / (1 - cfg.beta2**2)
        expected_second = cfg.learning_rate * m_hat / (math.sqrt(v_hat)
                                                       + cfg.epsilon)
        total = -float(net.layers[0][0][0, 0])
        assert total - first == pytest.approx(expected_second, rel=1e-12)

    def test_shape_mismatch(self):
        net = nncore.init_network(2, (), 2, seed=0)
        state = nncore.AdamState.for_network(net)
        bad = [(np.zeros((3, 2)), np.zeros(2))]
        with pytest.raises(ShapeError):
            nncore.adam_step(net, state, bad, self.config())

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            self.config(learning_rate=0.0)
        with pytest.raises(ConfigError):
            self.config(beta1=1.0)
        with pytest.raises(ConfigError):
            self.config(epsilon=0.0)


def separable_blobs(n=200, seed=7):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([
        rng.normal((-2.0, -2.0), 0.5, size=(half, 2)),
        rng.normal((2.0, 2.0), 0.5, size=(n - half, 2)),
    ])
    y = np.concatenate([np.zeros(half, int), np.ones(n - half, int)])
    return X, y


class TestTrain:
    def test_learns_separable_data(self):
        X, y = separable_blobs()
        # independent separability oracle
        from sklearn.linear_model import LogisticRegression

        oracle = LogisticRegression().fit(X, y)
        assert oracle.score(X, y) >= 0.95

        result = nncore.train(X, y, nncore.NetSpec(hidden_dims=(8,)),
                              nncore.TrainConfig(epochs=100, seed=0))
        assert nncore.accuracy(result.network, X, y) >= 0.95
        assert all(math.isfinite(v) for v in result.train_loss)

    def test_zero_epochs_returns_initialization(self):
        X, y = separable_blobs(60)
        cfg = nncore.TrainConfig(epochs=0, seed=3)
        result = nncore.train(X, y, nncore.NetSpec(hidden_dims=(4,)), cfg)
        fresh = nncore.init_network(2, (4,), 2, seed=3)
        for (w0, b0), (w1, b1) in zip(result.network.layers, fresh.layers):
            assert np.array_equal(w0, w1)
            assert np.array_equal(b0, b1)

    def test_same_seed_is_bit_reproducible(self):
        X, y = separable_blobs(80)
        cfg = nncore.TrainConfig(epochs=12, seed=11)
        a = nncore.train(X, y, nncore.NetSpec(hidden_dims=(6,)), cfg)
        b = nncore.train(X, y, nncore.NetSpec(hidden_dims=(6,)), cfg)
        for (wa, ba), (wb, bb) in zip(a.network.layers, b.network.layers):
            assert np.array_equal(wa, wb)
            assert np.array_equal(ba, bb)
        assert a.train_loss == b.train_loss

    def test_validation_selects_lowest_loss_snapshot(self):
        X, y = separable_blobs(120)
        val_X, val_y = separable_blobs(40, seed=9)
        result = nncore.train(X, y, nncore.NetSpec(hidden_dims=(6,)),
                              nncore.TrainConfig(epochs=25, seed=1),
                              validation=(val_X, val_y))
        assert result.best_epoch == int(np.argmin(result.val_loss))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ConfigError):
            nncore.train(np.zeros((0, 2)), np.zeros(0, int),
                         nncore.NetSpec(), nncore.TrainConfig(epochs=1))

    def test_missing_class_rejected(self):
        X = np.zeros((4, 2))
        y = np.zeros(4, int)
        with pytest.raises(ConfigError):
            nncore.train(X, y, nncore.NetSpec(class_count=2),
                         nncore.TrainConfig(epochs=1))

    def test_divergence_names_epoch(self):
        X, y = separable_blobs(64)
        # large enough that the forward pass overflows to inf, which the
        # stable softmax turns into a NaN loss
        cfg = nncore.TrainConfig(learning_rate=1e200, epochs=50, seed=0)
        with np.errstate(all="ignore"), pytest.raises(DivergenceError) as exc:
            nncore.train(X, y, nncore.NetSpec(hidden_dims=(8,)), cfg)
        assert exc.value.epoch >= 0
        assert "epoch" in str(exc.value)


class TestSerialization:
    def test_round_trip_is_exact(self, rng, tmp_path):
        net = random_network(rng, gradient_target="logit")
        path = tmp_path / "model.json"
        nncore.save_model(net, path)
        loaded = nncore.load_model(path)
        assert loaded.gradient_target == "logit"
        for (w0, b0), (w1, b1) in zip(net.layers, loaded.layers):
            assert np.array_equal(w0, w1)
            assert np.array_equal(b0, b1)

    def test_document_fields(self, rng):
        net = random_network(rng, input_dim=3, hidden=(5,), classes=2)
        doc = nncore.to_json_dict(net)
        assert doc["format"] == "fadkit-model"
        assert doc["version"] == 1
        assert doc["activation"] == "gelu"
        assert doc["layer_dims"] == [3, 5, 2]
        # row-major weights: one row per input unit
        assert len(doc["layers"][0]["weights"]) == 3
        assert len(doc["layers"][0]["weights"][0]) == 5

    def test_rejects_foreign_documents(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(ConfigError):
            nncore.load_model(path)
