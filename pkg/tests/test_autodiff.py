import numpy as np
import pytest

from app.autodiff import F, Graph, Tensor, diagnostics, finite_difference_gradient, no_grad, relative_error
from app.utils import GraphError, NumericalError, ShapeError


RNG = np.random.default_rng(7)


def away_from_zero(*shape):
    return RNG.uniform(0.5, 1.5, size=shape) * RNG.choice([-1.0, 1.0], size=shape)


def assert_gradient(fn, inputs, position, tol=1e-6):
    """Compare the tape gradient of sum(w * fn(...)) at inputs[position] with central differences."""
    weights = RNG.standard_normal(np.shape(fn(*[Tensor(x) for x in inputs]).data))

    def scalar(*tensors):
        return F.sum(F.mul(fn(*tensors), weights))

    tensors = [Tensor(x, requires_grad=(k == position)) for k, x in enumerate(inputs)]
    graph = Graph()
    with graph.recording():
        loss = scalar(*tensors)
    graph.backward(loss)

    def perturbed(t):
        args = [Tensor(x) for x in inputs]
        args[position] = t
        return scalar(*args)

    numeric = finite_difference_gradient(perturbed, inputs[position])
    assert relative_error(tensors[position].grad, numeric.data) < tol


class TestPrimitiveGradients:
    @pytest.mark.parametrize("op", [F.add, F.sub, F.mul, F.div])
    def test_binary_with_broadcast(self, op):
        a, b = away_from_zero(3, 4), away_from_zero(4)
        assert_gradient(op, [a, b], 0)
        assert_gradient(op, [a, b], 1)

    def test_matmul_matrix_and_vector(self):
        a, b, v = RNG.standard_normal((3, 4)), RNG.standard_normal((4, 2)), RNG.standard_normal(4)
        assert_gradient(F.matmul, [a, b], 0)
        assert_gradient(F.matmul, [a, b], 1)
        assert_gradient(F.matmul, [a, v], 0)
        assert_gradient(F.matmul, [a, v], 1)

    def test_dot(self):
        a, b = RNG.standard_normal(5), RNG.standard_normal(5)
        assert_gradient(F.dot, [a, b], 0)
        assert_gradient(F.dot, [a, b], 1)

    @pytest.mark.parametrize("op", [F.relu, F.exp, F.neg])
    def test_unary(self, op):
        assert_gradient(op, [away_from_zero(2, 3)], 0)

    def test_log(self):
        assert_gradient(F.log, [RNG.uniform(0.5, 2.0, size=(4,))], 0)

    @pytest.mark.parametrize("axis, keepdims", [(None, False), (0, False), ((2, 3), False), (1, True)])
    def test_reductions(self, axis, keepdims):
        x = RNG.standard_normal((2, 3, 2, 2))
        assert_gradient(lambda t: F.sum(t, axis=axis, keepdims=keepdims), [x], 0)
        assert_gradient(lambda t: F.mean(t, axis=axis, keepdims=keepdims), [x], 0)

    def test_shape_ops(self):
        x = RNG.standard_normal((2, 3, 4))
        assert_gradient(lambda t: F.reshape(t, (6, 4)), [x], 0)
        assert_gradient(lambda t: F.transpose(t, (2, 0, 1)), [x], 0)
        assert_gradient(lambda t: F.getitem(t, (slice(None), 1)), [x], 0)
        assert_gradient(lambda t: F.getitem(t, np.array([0, 0, 1])), [x], 0)

    def test_concat(self):
        a, b = RNG.standard_normal((2, 3)), RNG.standard_normal((2, 2))
        assert_gradient(lambda s, t: F.concat([s, t], axis=1), [a, b], 0)
        assert_gradient(lambda s, t: F.concat([s, t], axis=1), [a, b], 1)

    def test_l2_normalize(self):
        assert_gradient(F.l2_normalize, [RNG.standard_normal((3, 5))], 0)

    def test_logsumexp_with_weights(self):
        weights = np.array([0.5, 0.25, 1.0, 1.0])
        assert_gradient(lambda t: F.logsumexp(t, weights), [RNG.standard_normal(4)], 0)
        assert_gradient(F.logsumexp, [RNG.standard_normal(6) * 20.0], 0)

    @pytest.mark.parametrize("train", [True, False])
    def test_batch_norm(self, train):
        x, gamma, beta = RNG.standard_normal((5, 3)), away_from_zero(3), RNG.standard_normal(3)
        running_var = RNG.uniform(0.5, 2.0, size=3)

        def bn(x_t, gamma_t, beta_t):
            return F.batch_norm(x_t, gamma_t, beta_t, np.zeros(3), running_var.copy(), train=train)

        for position in range(3):
            assert_gradient(bn, [x, gamma, beta], position, tol=1e-5)


class TestNumerics:
    def test_logsumexp_is_shift_stable(self):
        value = F.logsumexp(Tensor([1000.0, 1000.0])).item()
        assert value == pytest.approx(1000.0 + np.log(2.0))

    def test_l2_normalize_passes_zero_rows(self):
        before = diagnostics["degenerate_l2"]
        out = F.l2_normalize(Tensor(np.array([[0.0, 0.0], [3.0, 4.0]])))
        np.testing.assert_array_equal(out.data, [[0.0, 0.0], [0.6, 0.8]])
        assert diagnostics["degenerate_l2"] == before + 1

    def test_batch_norm_updates_running_buffers(self):
        running_mean, running_var = np.zeros(2), np.ones(2)
        x = Tensor(np.array([[1.0, 2.0], [3.0, 6.0]]))
        F.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), running_mean, running_var, train=True)
        np.testing.assert_allclose(running_mean, [0.2, 0.4])
        np.testing.assert_allclose(running_var, [0.9 + 0.1 * 1.0, 0.9 + 0.1 * 4.0])

    def test_incompatible_shapes(self):
        with pytest.raises(ShapeError):
            F.add(Tensor(np.ones(3)), Tensor(np.ones(4)))
        with pytest.raises(ShapeError):
            F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_finite_difference_rejects_bad_input(self):
        with pytest.raises(ValueError):
            finite_difference_gradient(F.sum, np.ones(2), step=0.0)
        with pytest.raises(NumericalError):
            finite_difference_gradient(lambda t: F.sum(F.log(t)), np.zeros(2))


class TestGraph:
    def test_shared_input_accumulates(self):
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        graph = Graph()
        with graph.recording():
            loss = F.sum(x * x)
        graph.backward(loss)
        np.testing.assert_allclose(x.grad, 2.0 * x.data)

    def test_backward_requires_evaluation(self):
        loss = Tensor(1.0, requires_grad=True)
        with pytest.raises(GraphError):
            Graph().backward(loss)

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        graph = Graph()
        with graph.recording():
            out = x * 2.0
        with pytest.raises(ShapeError):
            graph.backward(out)

    def test_evaluate_runs_program(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        graph = Graph()
        outputs = graph.evaluate(lambda x: {"loss": F.sum(F.exp(x))}, {"x": x})
        graph.backward(outputs["loss"])
        np.testing.assert_allclose(x.grad, np.exp(x.data))

    def test_no_grad_suspends_recording(self):
        x = Tensor(np.ones(2), requires_grad=True)
        graph = Graph()
        with graph.recording():
            with no_grad():
                y = x * 3.0
            z = x * 2.0
        assert not y.requires_grad
        assert z.requires_grad
        assert len(graph.nodes) == 1

    def test_constants_are_not_recorded(self):
        graph = Graph()
        with graph.recording():
            F.add(Tensor(np.ones(2)), Tensor(np.ones(2)))
        assert graph.nodes == []
