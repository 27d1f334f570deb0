import numpy as np
import pytest

from noma_fl.fl import (
    MlpLayout,
    NumericalOverflowError,
    evaluate,
    init_params,
    local_update,
    loss_and_gradient,
)
from noma_fl.rng import substream

LAYOUT = MlpLayout(input_dim=4, hidden_dim=3, num_classes=3)


def tiny_batch(seed=0, n=12, layout=LAYOUT):
    rng = substream(seed, "batch")
    x = rng.standard_normal((n, layout.input_dim))
    y = rng.integers(0, layout.num_classes, size=n)
    return x, y


class TestLossAndGradient:
    def test_zero_weights_uniform_predictor(self):
        x, y = tiny_batch()
        loss, _ = loss_and_gradient(np.zeros(LAYOUT.num_params), x, y, LAYOUT)
        assert loss == pytest.approx(np.log(LAYOUT.num_classes), rel=1e-12)

    def test_gradient_matches_finite_differences(self):
        x, y = tiny_batch(seed=1)
        rng = substream(2, "params")
        w = rng.standard_normal(LAYOUT.num_params) * 0.5
        _, grad = loss_and_gradient(w, x, y, LAYOUT)
        h = 1e-5
        fd = np.empty_like(grad)
        for i in range(len(w)):
            wp, wm = w.copy(), w.copy()
            wp[i] += h
            wm[i] -= h
            fd[i] = (
                loss_and_gradient(wp, x, y, LAYOUT)[0]
                - loss_and_gradient(wm, x, y, LAYOUT)[0]
            ) / (2 * h)
        np.testing.assert_allclose(fd, grad, rtol=1e-5, atol=1e-8)

    def test_duplicating_batch_changes_nothing(self):
        x, y = tiny_batch(seed=3)
        w = substream(4, "params").standard_normal(LAYOUT.num_params)
        loss1, grad1 = loss_and_gradient(w, x, y, LAYOUT)
        loss2, grad2 = loss_and_gradient(
            w, np.vstack([x, x]), np.concatenate([y, y]), LAYOUT
        )
        assert loss2 == pytest.approx(loss1, rel=1e-12)
        np.testing.assert_allclose(grad2, grad1, atol=1e-14)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            loss_and_gradient(
                np.zeros(LAYOUT.num_params), np.zeros((0, 4)), np.zeros(0, dtype=int), LAYOUT
            )

    def test_overflow_detected(self):
        # tanh saturation shields the hidden layer, so the output weights
        # themselves must push the logits past the float64 range
        x, y = tiny_batch()
        w = np.full(LAYOUT.num_params, 1e308)
        with pytest.raises(NumericalOverflowError):
            loss_and_gradient(w, x, y, LAYOUT)


class TestLocalUpdate:
    def test_single_step_equals_gradient(self):
        x, y = tiny_batch(seed=5)
        w = substream(6, "params").standard_normal(LAYOUT.num_params)
        g = local_update(w, x, y, LAYOUT, learning_rate=0.1)
        np.testing.assert_allclose(g, loss_and_gradient(w, x, y, LAYOUT)[1])

    def test_identical_inputs_identical_updates(self):
        x, y = tiny_batch(seed=7)
        w = substream(8, "params").standard_normal(LAYOUT.num_params)
        g1 = local_update(w, x, y, LAYOUT, learning_rate=0.3)
        g2 = local_update(w.copy(), x.copy(), y.copy(), LAYOUT, learning_rate=0.3)
        np.testing.assert_array_equal(g1, g2)

    def test_multi_step_displacement_consistency(self):
        x, y = tiny_batch(seed=9)
        w = substream(10, "params").standard_normal(LAYOUT.num_params)
        lr = 0.05
        g = local_update(w, x, y, LAYOUT, learning_rate=lr, local_steps=3)
        current = w.copy()
        for _ in range(3):
            current = current - lr * loss_and_gradient(current, x, y, LAYOUT)[1]
        np.testing.assert_allclose(w - lr * g, current, atol=1e-12)


class TestEvaluate:
    def test_memorizing_model_scores_one(self):
        # train to (near) zero loss on a tiny separable set, expect accuracy 1
        layout = MlpLayout(input_dim=2, hidden_dim=8, num_classes=2)
        x = np.array([[2.0, 0.0], [-2.0, 0.0], [2.2, 0.4], [-2.2, -0.4]])
        y = np.array([0, 1, 0, 1])
        w = init_params(layout, substream(11, "model_init"))
        for _ in range(300):
            w = w - 0.5 * loss_and_gradient(w, x, y, layout)[1]
        acc, loss = evaluate(w, x, y, layout)
        assert acc == 1.0
        assert loss < 0.05

    def test_random_predictor_near_chance(self):
        layout = MlpLayout(input_dim=5, hidden_dim=4, num_classes=4)
        rng = substream(12, "batch")
        x = rng.standard_normal((8000, 5))
        y = rng.integers(0, 4, size=8000)
        w = init_params(layout, substream(13, "model_init"))
        acc, _ = evaluate(w, x, y, layout)
        assert acc == pytest.approx(0.25, abs=0.03)

    def test_invariant_to_ordering(self):
        x, y = tiny_batch(seed=14, n=40)
        w = substream(15, "params").standard_normal(LAYOUT.num_params)
        perm = substream(16, "perm").permutation(40)
        assert evaluate(w, x, y, LAYOUT) == evaluate(w, x[perm], y[perm], LAYOUT)


class TestLayout:
    def test_param_count(self):
        assert LAYOUT.num_params == 4 * 3 + 3 + 3 * 3 + 3

    def test_unpack_roundtrip(self):
        w = np.arange(LAYOUT.num_params, dtype=float)
        w1, b1, w2, b2 = LAYOUT.unpack(w)
        repacked = np.concatenate([w1.ravel(), b1, w2.ravel(), b2])
        np.testing.assert_array_equal(repacked, w)

    def test_wrong_size_rejected(self):
        with pytest.raises(ValueError):
            LAYOUT.unpack(np.zeros(10))


def test_fedavg_on_shards_equals_pooled_descent():
    # equal-size shards, error-free aggregation: one round of size-weighted
    # FedAvg must equal one centralized full-batch step on the pooled data
    layout = MlpLayout(input_dim=3, hidden_dim=4, num_classes=3)
    rng = substream(17, "batch")
    x = rng.standard_normal((30, 3))
    y = rng.integers(0, 3, size=30)
    w = init_params(layout, substream(18, "model_init"))
    lr = 0.2
    shards = np.array_split(np.arange(30), 3)
    locals_ = np.vstack(
        [w - lr * loss_and_gradient(w, x[s], y[s], layout)[1] for s in shards]
    )
    sizes = np.array([len(s) for s in shards], dtype=float)
    fed = sizes @ locals_ / sizes.sum()
    central = w - lr * loss_and_gradient(w, x, y, layout)[1]
    np.testing.assert_allclose(fed, central, atol=1e-12)
