"""Primitive-level tests: forward oracles and finite-difference gradients."""

import numpy as np
import pytest

import realbogus.nn.ops as ops
from realbogus.errors import ConfigurationError, DimensionError

EPS = 1e-5
TOL = 1e-4


def fd_gradient(f, x, eps=EPS):
    """Central finite differences of scalar f w.r.t. every entry of x."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        grad[i] = (fp - fm) / (2 * eps)
    return grad


def assert_close_rel(got, want, tol=TOL):
    denom = np.maximum(np.maximum(np.abs(got), np.abs(want)), 1e-8)
    rel = np.abs(got - want) / denom
    mask = (np.abs(got) > 1e-8) | (np.abs(want) > 1e-8)
    assert not mask.any() or rel[mask].max() < tol


class TestConvForward:
    def test_sliding_window_oracle(self, rng):
        # independent 4-term loop oracle on a 4x4 input, 2x2 kernel
        x = rng.normal(size=(4, 4, 1))
        w = rng.normal(size=(2, 2, 1, 1))
        b = rng.normal(size=1)
        out = ops.conv2d_forward(x, w, b)
        for y in range(3):
            for xx in range(3):
                want = b[0] + sum(
                    x[y + u, xx + v, 0] * w[u, v, 0, 0]
                    for u in range(2) for v in range(2))
                assert out[y, xx, 0] == pytest.approx(want, rel=1e-12)

    def test_multichannel_oracle(self, rng):
        x = rng.normal(size=(2, 5, 6, 3))
        w = rng.normal(size=(3, 2, 3, 4))
        b = rng.normal(size=4)
        out = ops.conv2d_forward(x, w, b)
        assert out.shape == (2, 3, 5, 4)
        ref = np.zeros_like(out)
        for n in range(2):
            for y in range(3):
                for xx in range(5):
                    for f in range(4):
                        acc = b[f]
                        for u in range(3):
                            for v in range(2):
                                for c in range(3):
                                    acc += x[n, y + u, xx + v, c] * w[u, v, c, f]
                        ref[n, y, xx, f] = acc
        np.testing.assert_allclose(out, ref, rtol=1e-12)

    def test_identity_kernel(self):
        x = np.arange(9.0).reshape(3, 3, 1)
        w = np.ones((1, 1, 1, 1))
        out = ops.conv2d_forward(x, w, np.zeros(1))
        np.testing.assert_array_equal(out, x)

    def test_kernel_too_large(self):
        with pytest.raises(DimensionError):
            ops.conv2d_forward(np.zeros((3, 3, 1)), np.zeros((4, 4, 1, 1)),
                               np.zeros(1))

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            ops.conv2d_forward(np.zeros((5, 5, 2)), np.zeros((3, 3, 1, 1)),
                               np.zeros(1))


class TestConvBackward:
    def test_finite_difference(self, rng):
        x = rng.normal(size=(2, 5, 5, 2))
        w = rng.normal(size=(3, 3, 2, 3))
        b = rng.normal(size=3)
        up = rng.normal(size=(2, 3, 3, 3))

        def loss():
            return float((ops.conv2d_forward(x, w, b) * up).sum())

        gx, gw, gb = ops.conv2d_backward(x, w, up)
        assert_close_rel(gx, fd_gradient(loss, x))
        assert_close_rel(gw, fd_gradient(loss, w))
        assert_close_rel(gb, fd_gradient(loss, b))

    def test_skip_input_gradient(self, rng):
        x = rng.normal(size=(2, 4, 4, 1))
        w = rng.normal(size=(2, 2, 1, 2))
        up = rng.normal(size=(2, 3, 3, 2))
        gx, gw, gb = ops.conv2d_backward(x, w, up)
        gx2, gw2, gb2 = ops.conv2d_backward(x, w, up, need_input_grad=False)
        assert gx2 is None
        np.testing.assert_array_equal(gw, gw2)
        np.testing.assert_array_equal(gb, gb2)

    def test_upstream_shape_check(self, rng):
        x = rng.normal(size=(1, 4, 4, 1))
        w = rng.normal(size=(2, 2, 1, 1))
        with pytest.raises(DimensionError):
            ops.conv2d_backward(x, w, np.zeros((1, 4, 4, 1)))


class TestMaxPool:
    def test_forward_oracle(self, rng):
        x = rng.normal(size=(3, 6, 8, 2))
        out, _ = ops.maxpool_forward(x)
        ref = x.reshape(3, 3, 2, 4, 2, 2).max(axis=(2, 4))
        np.testing.assert_array_equal(out, ref)

    def test_floor_semantics_drops_trailing(self):
        x = np.arange(5.0 * 7).reshape(5, 7, 1)
        out, _ = ops.maxpool_forward(x)
        assert out.shape == (2, 3, 1)

    def test_tie_routes_to_first(self):
        # all-equal window: gradient must go to the top-left element only
        x = np.ones((2, 2, 1))
        out, cache = ops.maxpool_forward(x)
        grad = ops.maxpool_backward(cache, np.ones((1, 1, 1)))
        np.testing.assert_array_equal(grad[:, :, 0], [[1.0, 0.0], [0.0, 0.0]])

    def test_tie_row_major_order(self):
        # tie between positions (0,1) and (1,0): row-major picks (0,1)
        x = np.array([[0.0, 5.0], [5.0, 1.0]]).reshape(2, 2, 1)
        _, cache = ops.maxpool_forward(x)
        grad = ops.maxpool_backward(cache, np.ones((1, 1, 1)))
        np.testing.assert_array_equal(grad[:, :, 0], [[0.0, 1.0], [0.0, 0.0]])

    def test_finite_difference(self, rng):
        # random 4x4 input, ties vanishingly unlikely
        x = rng.normal(size=(4, 4, 1))
        up = rng.normal(size=(2, 2, 1))

        def loss():
            out, _ = ops.maxpool_forward(x)
            return float((out * up).sum())

        _, cache = ops.maxpool_forward(x)
        grad = ops.maxpool_backward(cache, up)
        assert_close_rel(grad, fd_gradient(loss, x))

    def test_too_small(self):
        with pytest.raises(DimensionError):
            ops.maxpool_forward(np.zeros((1, 4, 1)))

    def test_stale_indices_rejected(self, rng):
        x = rng.normal(size=(1, 4, 4, 1))
        _, cache = ops.maxpool_forward(x)
        with pytest.raises(ConfigurationError):
            ops.maxpool_backward(cache, np.zeros((1, 3, 3, 1)))


class TestDropout:
    def test_eval_is_identity(self, rng):
        x = rng.normal(size=(4, 4, 1))
        out, mask = ops.dropout(x, 0.4, train=False)
        assert mask is None
        np.testing.assert_array_equal(out, x)

    def test_rate_zero_is_identity(self, rng):
        x = rng.normal(size=(3, 3, 1))
        out, mask = ops.dropout(x, 0.0, train=True, rng=rng)
        assert mask is None
        np.testing.assert_array_equal(out, x)

    def test_inverted_scaling_preserves_mean(self):
        # law of large numbers: E[dropout(x)] == x
        rng = np.random.default_rng(7)
        x = np.ones((400, 400))
        out, _ = ops.dropout(x, 0.4, train=True, rng=rng)
        kept = out[out != 0]
        assert np.allclose(kept, 1.0 / 0.6)
        assert abs(out.mean() - 1.0) < 0.01

    def test_mask_fraction(self):
        rng = np.random.default_rng(3)
        _, mask = ops.dropout(np.ones((500, 500)), 0.4, train=True, rng=rng)
        assert abs((mask == 0).mean() - 0.4) < 0.01

    def test_backward_applies_mask(self, rng):
        x = rng.normal(size=(5, 5))
        out, mask = ops.dropout(x, 0.4, train=True, rng=rng)
        up = rng.normal(size=(5, 5))
        np.testing.assert_array_equal(ops.dropout_backward(mask, up), up * mask)
        np.testing.assert_array_equal(ops.dropout_backward(None, up), up)

    def test_requires_rng_in_train(self):
        with pytest.raises(ConfigurationError):
            ops.dropout(np.ones((2, 2)), 0.4, train=True)

    def test_bad_rate(self):
        with pytest.raises(ConfigurationError):
            ops.dropout(np.ones((2, 2)), 1.0, train=True)


class TestDense:
    def test_forward(self, rng):
        x = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 2))
        b = rng.normal(size=2)
        np.testing.assert_allclose(ops.dense_forward(x, w, b), x @ w + b)

    def test_finite_difference(self, rng):
        x = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 2))
        b = rng.normal(size=2)
        up = rng.normal(size=(3, 2))

        def loss():
            return float((ops.dense_forward(x, w, b) * up).sum())

        gx, gw, gb = ops.dense_backward(x, w, up)
        assert_close_rel(gx, fd_gradient(loss, x))
        assert_close_rel(gw, fd_gradient(loss, w))
        assert_close_rel(gb, fd_gradient(loss, b))

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            ops.dense_forward(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros(2))


class TestActivationsAndLoss:
    def test_relu(self):
        x = np.array([-2.0, 0.0, 3.0])
        np.testing.assert_array_equal(ops.relu(x), [0.0, 0.0, 3.0])

    def test_relu_backward_gates_on_preactivation(self):
        x = np.array([-1.0, 0.0, 2.0])
        up = np.array([5.0, 5.0, 5.0])
        np.testing.assert_array_equal(ops.relu_backward(x, up), [0.0, 0.0, 5.0])

    def test_softmax_rows_sum_to_one(self, rng):
        p = ops.softmax(rng.normal(size=(6, 4)))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert (p > 0).all()

    def test_softmax_shift_invariance(self, rng):
        z = rng.normal(size=(3, 4))
        np.testing.assert_allclose(ops.softmax(z), ops.softmax(z + 100.0),
                                   atol=1e-12)

    def test_softmax_overflow_safe(self):
        p = ops.softmax(np.array([1000.0, 0.0]))
        assert np.isfinite(p).all()
        assert p[0] == pytest.approx(1.0)

    def test_crossentropy_value(self):
        probs = np.array([[0.9, 0.1], [0.2, 0.8]])
        loss, _ = ops.sparse_categorical_crossentropy(probs, np.array([0, 1]))
        want = -(np.log(0.9) + np.log(0.8)) / 2
        assert loss == pytest.approx(want, rel=1e-12)

    def test_crossentropy_clamp(self):
        probs = np.array([[0.0, 1.0]])
        loss, _ = ops.sparse_categorical_crossentropy(probs, np.array([0]))
        assert loss == pytest.approx(-np.log(1e-12))

    def test_fused_gradient_matches_fd_through_softmax(self, rng):
        logits = rng.normal(size=(4, 3))
        labels = np.array([0, 2, 1, 1])

        def loss():
            l, _ = ops.sparse_categorical_crossentropy(ops.softmax(logits), labels)
            return l

        _, grad = ops.sparse_categorical_crossentropy(ops.softmax(logits), labels)
        assert_close_rel(grad, fd_gradient(loss, logits))

    def test_labels_out_of_range(self):
        with pytest.raises(ConfigurationError):
            ops.sparse_categorical_crossentropy(np.array([[0.5, 0.5]]),
                                                np.array([2]))


class TestSgd:
    def test_update_rule(self):
        p = np.array([1.0, 2.0])
        ops.sgd_step([p], [np.array([0.5, -1.0])], lr=0.1)
        np.testing.assert_allclose(p, [0.95, 2.1])

    def test_lr_zero_keeps_params(self, rng):
        p = rng.normal(size=(3, 3))
        before = p.copy()
        ops.sgd_step([p], [rng.normal(size=(3, 3))], lr=0.0)
        np.testing.assert_array_equal(p, before)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ops.sgd_step([np.zeros(2)], [np.zeros(3)], lr=0.1)
