import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentattr.errors import ShapeError
from latentattr.model import (
    MlpSpec,
    jacobian_fd,
    linear_mlp,
    mlp_forward,
    mlp_forward_batch,
    mlp_jacobian,
    random_mlp,
)


def reference_forward(spec, x):
    """Plain-Python evaluator used as an independent check of the kernels."""
    h = [float(v) for v in x]
    for W, b, act in zip(spec.weights, spec.biases, spec.activations):
        a = [sum(W[o, i] * h[i] for i in range(len(h))) + b[o] for o in range(W.shape[0])]
        if act == "tanh":
            h = [np.tanh(v) for v in a]
        elif act == "relu":
            h = [max(v, 0.0) for v in a]
        else:
            h = a
    return np.array(h)


class TestForward:
    def test_identity(self, identity2, backend):
        np.testing.assert_array_equal(mlp_forward(identity2, [1.0, 2.0]), [1.0, 2.0])

    def test_hand_matvec(self, linear2, backend):
        np.testing.assert_array_equal(mlp_forward(linear2, [1.0, 1.0]), [3.0, 7.0])

    def test_matches_reference_evaluator(self, backend):
        spec = random_mlp([20, 12, 4], seed=3)
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.uniform(-2, 2, 20)
            np.testing.assert_allclose(mlp_forward(spec, x), reference_forward(spec, x), rtol=0, atol=1e-13)

    def test_pure(self, tanh_mlp, backend):
        x = np.linspace(-1, 1, 20)
        a, b = mlp_forward(tanh_mlp, x), mlp_forward(tanh_mlp, x)
        assert a.tobytes() == b.tobytes()

    def test_batch_matches_single(self, tanh_mlp, backend):
        X = np.random.default_rng(1).uniform(-2, 2, (7, 20))
        single = np.array([mlp_forward(tanh_mlp, x) for x in X])
        np.testing.assert_allclose(mlp_forward_batch(tanh_mlp, X), single, atol=1e-14)

    def test_dimension_mismatch(self, linear2):
        with pytest.raises(ShapeError):
            mlp_forward(linear2, [1.0, 2.0, 3.0])

    def test_incompatible_layers_rejected(self):
        with pytest.raises(ShapeError):
            MlpSpec((np.ones((3, 2)), np.ones((2, 4))), (np.zeros(3), np.zeros(2)), ("tanh", "identity"))

    def test_unknown_activation(self):
        with pytest.raises(ShapeError):
            MlpSpec((np.ones((1, 1)),), (np.zeros(1),), ("sigmoid",))


class TestJacobian:
    def test_linear_is_weight_matrix(self, linear2, backend):
        for x in ([0.0, 0.0], [5.0, -3.0], [1e3, 2.5]):
            np.testing.assert_array_equal(mlp_jacobian(linear2, x), [[1, 2], [3, 4]])

    def test_identity(self, identity2, backend):
        np.testing.assert_array_equal(mlp_jacobian(identity2, [0.3, -7.0]), np.eye(2))

    def test_deep_linear_is_weight_product(self, backend):
        rng = np.random.default_rng(5)
        Ws = [rng.normal(size=(6, 5)), rng.normal(size=(4, 6)), rng.normal(size=(3, 4))]
        spec = MlpSpec(tuple(Ws), tuple(np.zeros(w.shape[0]) for w in Ws), ("identity",) * 3)
        expected = Ws[2] @ Ws[1] @ Ws[0]
        for x in rng.uniform(-2, 2, (5, 5)):
            np.testing.assert_allclose(mlp_jacobian(spec, x), expected, rtol=0, atol=1e-12)

    def test_tanh_matches_finite_differences(self, backend):
        spec = random_mlp([10, 8, 4], seed=2, scale=1.5)
        rng = np.random.default_rng(2)
        for x in rng.uniform(-2, 2, (20, 10)):
            assert np.max(np.abs(mlp_jacobian(spec, x) - jacobian_fd(spec, x, 1e-5))) <= 1e-6

    def test_relu_subgradient_zero_at_kink(self, backend):
        spec = MlpSpec((np.array([[1.0, -1.0]]),), (np.zeros(1),), ("relu",))
        np.testing.assert_array_equal(mlp_jacobian(spec, [2.0, 2.0]), [[0.0, 0.0]])
        np.testing.assert_array_equal(mlp_jacobian(spec, [3.0, 2.0]), [[1.0, -1.0]])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=10, max_size=10))
    def test_fd_property(self, xs):
        spec = random_mlp([10, 16, 4], seed=9, scale=1.5)
        x = np.array(xs)
        assert np.max(np.abs(mlp_jacobian(spec, x) - jacobian_fd(spec, x, 1e-5))) <= 1e-6


class TestFiniteDifference:
    def test_linear_exact(self, linear2):
        np.testing.assert_allclose(jacobian_fd(linear2, [0.7, -0.2], 1e-5), [[1, 2], [3, 4]], atol=1e-10)

    def test_identity(self, identity2):
        np.testing.assert_allclose(jacobian_fd(identity2, [0.5, 0.5], 1e-5), np.eye(2), atol=1e-12)

    def test_step_must_be_positive(self, linear2):
        with pytest.raises(ValueError):
            jacobian_fd(linear2, [0.0, 0.0], 0.0)


def test_linear_mlp_defaults_zero_bias():
    spec = linear_mlp([[2.0]])
    assert spec.biases[0].tolist() == [0.0]
