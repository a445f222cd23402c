"""Dense kernels and the finite-difference oracle."""

import numpy as np
import pytest

from latseq.errors import DimensionError
from latseq.numerics import (
    affine,
    central_difference_grad,
    global_norm,
    global_norm_clip,
    hadamard,
    sigmoid,
    softmax,
    tanh,
)


class TestAffine:
    def test_identity(self):
        np.testing.assert_array_equal(affine(np.eye(2), [3.0, -1.0]), [3.0, -1.0])

    def test_zero_matrix(self):
        np.testing.assert_array_equal(affine(np.zeros((2, 2)), [5.0, 7.0]), [0.0, 0.0])

    def test_hand_product(self):
        np.testing.assert_array_equal(
            affine([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0]), [3.0, 7.0]
        )

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            affine(np.zeros((2, 3)), np.zeros(2))

    def test_linearity(self):
        rng = np.random.default_rng(0)
        m = rng.uniform(-1, 1, (4, 3))
        x, y = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        a, b = 0.3, -1.2
        np.testing.assert_allclose(
            affine(m, a * x + b * y),
            a * affine(m, x) + b * affine(m, y),
            atol=1e-12,
        )


class TestElementwise:
    def test_sigmoid_at_zero(self):
        np.testing.assert_array_equal(sigmoid(np.zeros(2)), [0.5, 0.5])

    def test_sigmoid_stable_for_large_inputs(self):
        out = sigmoid(np.array([-1000.0, 1000.0]))
        assert out[0] == 0.0 and out[1] == 1.0  # saturates without overflow

    def test_sigmoid_range(self):
        out = sigmoid(np.linspace(-30, 30, 101))
        assert np.all(out >= 0.0) and np.all(out <= 1.0)

    def test_tanh_odd_at_origin(self):
        assert tanh(np.zeros(1))[0] == 0.0

    def test_hadamard(self):
        np.testing.assert_array_equal(
            hadamard([2.0, 3.0], [4.0, -1.0]), [8.0, -3.0]
        )

    def test_hadamard_shape_mismatch(self):
        with pytest.raises(DimensionError):
            hadamard(np.zeros(2), np.zeros(3))


class TestSoftmax:
    def test_equal_scores(self):
        for c in (-100.0, 0.0, 42.0):
            np.testing.assert_allclose(softmax([c, c]), [0.5, 0.5], atol=1e-15)

    def test_single_score(self):
        np.testing.assert_array_equal(softmax([3.0]), [1.0])

    def test_closed_form(self):
        np.testing.assert_allclose(
            softmax([np.log(1.0), np.log(3.0)]), [0.25, 0.75], atol=1e-14
        )

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = rng.uniform(-50, 50, int(rng.integers(1, 10)))
            p = softmax(x)
            assert abs(p.sum() - 1.0) <= 1e-12
            assert np.all(p > 0)
            np.testing.assert_allclose(p, softmax(x + 17.3), atol=1e-12)

    def test_overflow_safe(self):
        p = softmax([1000.0, 1001.0])
        assert np.isfinite(p).all() and abs(p.sum() - 1.0) <= 1e-12


class TestCentralDifference:
    def test_quadratic(self):
        grad = central_difference_grad(lambda x: float(x @ x), np.array([1.0, 2.0]))
        np.testing.assert_allclose(grad, [2.0, 4.0], atol=1e-8)

    def test_constant(self):
        grad = central_difference_grad(lambda x: 5.0, np.array([1.0, -3.0]))
        np.testing.assert_array_equal(grad, [0.0, 0.0])

    def test_sin(self):
        grad = central_difference_grad(lambda x: float(np.sin(x[0])), np.array([0.0]))
        np.testing.assert_allclose(grad, [1.0], atol=1e-9)

    def test_matrix_shaped_input(self):
        m0 = np.array([[1.0, 2.0], [3.0, 4.0]])
        grad = central_difference_grad(lambda m: float(np.sum(m * m)), m0)
        np.testing.assert_allclose(grad, 2.0 * m0, atol=1e-8)


class TestGlobalNormClip:
    def test_under_threshold_unchanged(self):
        g = [np.array([0.3, 0.4])]  # norm 0.5
        out = global_norm_clip(g, 1.0)
        np.testing.assert_array_equal(out[0], g[0])

    def test_three_four_five(self):
        (out,) = global_norm_clip([np.array([3.0, 4.0])], 1.0)
        np.testing.assert_allclose(out, [0.6, 0.8], atol=1e-15)

    def test_joint_norm_across_tensors(self):
        a = np.full((2, 2), 5.0)  # sum of squares 100
        b = np.zeros(3)
        out = global_norm_clip([a, b], 1.0)  # joint norm 10 -> scale 0.1
        np.testing.assert_allclose(out[0], np.full((2, 2), 0.5), atol=1e-15)

    def test_post_clip_norm_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            tensors = [rng.uniform(-3, 3, (4, 4)), rng.uniform(-3, 3, 7)]
            out = global_norm_clip(tensors, 1.0)
            assert global_norm(out) <= 1.0 + 1e-12

    def test_idempotent_bitwise(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            tensors = [rng.uniform(-3, 3, (3, 5)), rng.uniform(-3, 3, 2)]
            once = global_norm_clip(tensors, 1.0)
            twice = global_norm_clip(once, 1.0)
            for a, b in zip(once, twice):
                assert np.array_equal(a, b)  # bit for bit

    def test_rejects_nonpositive_max(self):
        with pytest.raises(ValueError):
            global_norm_clip([np.ones(2)], 0.0)


class TestPurity:
    def test_bitwise_reproducible(self):
        x = np.random.default_rng(4).uniform(-5, 5, 64)
        assert np.array_equal(sigmoid(x), sigmoid(x))
        assert np.array_equal(softmax(x), softmax(x))
        m = x.reshape(8, 8)
        assert np.array_equal(affine(m, x[:8]), affine(m, x[:8]))
