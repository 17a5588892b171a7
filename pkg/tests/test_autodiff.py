import math

import numpy as np
import pytest

from convrank import autodiff as ad
from oracles import central_difference, relative_error


def leaf(arr):
    return ad.parameter(np.array(arr, dtype=np.float64), dtype=np.float64)


def check_gradients(build, arrays, tol=1e-4):
    """Compare backward() against central differences of sum(build(*leaves))."""
    leaves = [leaf(a) for a in arrays]
    out = build(*leaves)
    ad.backward(ad.reshape(out, (out.value.size,)) if out.value.size == 1 else _sum(out))
    analytic = [n.grad for n in leaves]

    def f():
        vals = build(*[ad.constant(n.value) for n in leaves]).value
        return float(np.sum(vals))

    numeric = central_difference(f, [n.value for n in leaves])
    for a, n in zip(analytic, numeric):
        assert relative_error(a, n).max() <= tol


def _sum(node):
    flat = ad.reshape(node, (1, node.value.size))
    ones = ad.constant(np.ones((node.value.size, 1), dtype=node.value.dtype))
    return ad.reshape(ad.matmul(flat, ones), (1,))


class TestForwardValues:
    def test_matmul_identity(self):
        x = np.array([[1.5, -2.0], [0.25, 3.0]])
        out = ad.matmul(ad.constant(np.eye(2)), ad.constant(x))
        np.testing.assert_array_equal(out.value, x)

    def test_matmul_hand(self):
        out = ad.matmul(ad.constant([[1.0, 2.0]]), ad.constant([[3.0], [4.0]]))
        assert out.value.tolist() == [[11.0]]

    def test_matmul_shape_error_names_shapes(self):
        with pytest.raises(ad.DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(ad.constant(np.zeros((2, 3))), ad.constant(np.zeros((2, 3))))

    def test_elementwise_values(self):
        z = ad.constant([0.0])
        assert ad.tanh(z).value[0] == 0.0
        assert ad.sigmoid(z).value[0] == 0.5
        x = ad.constant([1.0, -2.0])
        np.testing.assert_array_equal(ad.add(x, ad.constant([0.0, 0.0])).value, x.value)

    def test_add_shape_mismatch(self):
        with pytest.raises(ad.DimensionError):
            ad.add(ad.constant([1.0, 2.0]), ad.constant([1.0, 2.0, 3.0]))

    def test_sigmoid_extremes_finite(self):
        y = ad.sigmoid(ad.constant([-1000.0, 1000.0])).value
        assert np.all(np.isfinite(y))
        assert y[0] == 0.0 and y[1] == 1.0

    @pytest.mark.parametrize("x,expected", [
        ([0.0, 0.0], [0.5, 0.5]),
        ([7.0, 7.0, 7.0], [1 / 3] * 3),
        ([-40.0, -40.0, -40.0], [1 / 3] * 3),
    ])
    def test_softmax_symmetric(self, x, expected):
        np.testing.assert_allclose(ad.softmax(ad.constant(x)).value, expected, rtol=1e-6)

    def test_softmax_no_overflow(self):
        y = ad.softmax(ad.constant([1000.0, 0.0])).value
        assert np.all(np.isfinite(y))
        np.testing.assert_allclose(y, [1.0, 0.0], atol=1e-12)

    def test_cross_entropy_values(self):
        assert ad.cross_entropy(ad.constant([0.5, 0.5]), 0).value[0] == pytest.approx(math.log(2))
        assert ad.cross_entropy(ad.constant([1.0, 0.0]), 0).value[0] == 0.0

    def test_cross_entropy_clamps_zero_probability(self):
        loss = ad.cross_entropy(ad.constant([1.0, 0.0]), 1).value[0]
        assert loss == pytest.approx(-math.log(1e-12))

    @pytest.mark.parametrize("target", [2, -1, 0.5])
    def test_cross_entropy_bad_target(self, target):
        with pytest.raises(IndexError):
            ad.cross_entropy(ad.constant([0.5, 0.5]), target)

    def test_cross_entropy_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            ad.cross_entropy(ad.constant([0.5, 0.6]), 0)


class TestDropout:
    def test_rate_zero_is_identity(self):
        x = ad.constant(np.arange(6.0).reshape(2, 3))
        rng = np.random.default_rng(0)
        assert ad.dropout(x, 0.0, rng, training=True) is x

    def test_inference_is_identity(self):
        x = ad.constant(np.arange(6.0).reshape(2, 3))
        assert ad.dropout(x, 0.5, np.random.default_rng(0), training=False) is x

    def test_survivor_statistics(self):
        x = ad.constant(np.ones(100_000, dtype=np.float32))
        rng = np.random.Generator(np.random.Philox(123))
        y = ad.dropout(x, 0.15, rng, training=True).value
        survivors = np.mean(y != 0)
        assert abs(survivors - 0.85) <= 0.01
        assert abs(float(np.mean(y, dtype=np.float64)) - 1.0) <= 0.01

    def test_rejects_rate_one(self):
        with pytest.raises(ValueError):
            ad.dropout(ad.constant([1.0]), 1.0, np.random.default_rng(0), True)


class TestBackward:
    def test_identity(self):
        x = leaf([2.0])
        ad.backward(x)
        assert x.grad.tolist() == [1.0]

    def test_shared_use_accumulates(self):
        x = leaf([3.0])
        ad.backward(ad.add(x, x))
        assert x.grad.tolist() == [2.0]

    def test_non_scalar_rejected(self):
        with pytest.raises(ad.DimensionError):
            ad.backward(leaf([1.0, 2.0]))

    def test_constants_get_no_gradient(self):
        c = ad.constant([1.0])
        x = leaf([2.0])
        ad.backward(ad.mul(c, x))
        assert c.grad is None
        assert x.grad.tolist() == [1.0]

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))

        def run():
            la, lb = leaf(a), leaf(b)
            ad.backward(_sum(ad.tanh(ad.matmul(la, lb))))
            return la.grad.tobytes() + lb.grad.tobytes()

        assert run() == run()


class TestFiniteDifferences:
    rng = np.random.default_rng(2024)

    def r(self, *shape):
        return self.rng.normal(size=shape)

    def test_matmul(self):
        check_gradients(ad.matmul, [self.r(3, 4), self.r(4, 2)])

    def test_add_sub_mul(self):
        a, b = self.r(2, 3), self.r(2, 3)
        check_gradients(ad.add, [a, b])
        check_gradients(ad.sub, [a, b])
        check_gradients(ad.mul, [a, b])

    def test_scale(self):
        check_gradients(lambda x: ad.scale(x, -2.5), [self.r(4)])

    def test_tanh_sigmoid(self):
        check_gradients(ad.tanh, [self.r(5)])
        check_gradients(ad.sigmoid, [self.r(5)])

    def test_softmax_weighted(self):
        w = ad.constant(self.r(4))
        check_gradients(lambda x: ad.mul(ad.softmax(x), w), [self.r(4)])

    def test_softmax_rows_weighted(self):
        w = ad.constant(self.r(3, 4))
        check_gradients(lambda x: ad.mul(ad.softmax(x), w), [self.r(3, 4)])

    def test_softmax_cross_entropy_matches_closed_form(self):
        x = leaf(self.r(3))
        ad.backward(ad.cross_entropy(ad.softmax(x), 1))
        p = np.exp(x.value - x.value.max())
        p /= p.sum()
        np.testing.assert_allclose(x.grad, p - np.eye(3)[1], atol=1e-12)
        check_gradients(lambda v: ad.cross_entropy(ad.softmax(v), 1), [self.r(3)])

    def test_structural_ops(self):
        base, w1 = ad.constant(self.r(3, 2)), ad.constant(self.r(3, 2))
        check_gradients(lambda b: ad.mul(ad.add_bias(base, b), w1), [self.r(2)])
        w2 = ad.constant(self.r(5, 2))
        check_gradients(lambda x, y: ad.mul(ad.concat([x, y], axis=0), w2), [self.r(2, 2), self.r(3, 2)])
        w3 = ad.constant(self.r(3, 2))
        check_gradients(lambda x: ad.mul(ad.transpose(x), w3), [self.r(2, 3)])
        w4 = ad.constant(self.r(1, 3))
        check_gradients(lambda x: ad.mul(ad.index(x, (slice(1, 2), slice(None))), w4), [self.r(3, 3)])


class TestClip:
    def test_hand_example(self):
        (g,) = ad.global_norm_clip([np.array([3.0, 4.0])], 1.0)
        np.testing.assert_allclose(g, [0.6, 0.8], rtol=1e-12)

    def test_below_threshold_unchanged(self):
        grads = [np.array([0.3, 0.4])]
        out = ad.global_norm_clip(grads, 1.0)
        np.testing.assert_array_equal(out[0], grads[0])

    def test_never_increases_components(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            grads = [rng.normal(scale=rng.uniform(0.01, 5), size=s) for s in ((3,), (2, 2))]
            out = ad.global_norm_clip(grads, 1.0)
            for a, b in zip(grads, out):
                assert np.all(np.abs(b) <= np.abs(a) + 1e-15)
