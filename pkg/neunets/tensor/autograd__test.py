import numpy as np
import pytest

from neunets.tensor import ops
from neunets.tensor.autograd import NonFiniteError, TapeError, Tensor, backward, parameter
from neunets.tensor.gradcheck import check_gradients, projected_loss


def f64(array):
    return parameter(np.asarray(array, dtype=np.float64), dtype=np.float64)


def test_single_fc_squared_loss_matches_closed_form():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 4))
    y = rng.normal(size=(1, 3))
    w = f64(rng.normal(size=(4, 3)))
    pred = ops.dense(Tensor(x, dtype=np.float64), w)
    loss = ops.reduce_sum(ops.mul(ops.sub(pred, y), ops.sub(pred, y)))
    grads = backward(loss)
    expected = x.T @ (2 * (pred.data - y))
    np.testing.assert_allclose(grads[w], expected, atol=1e-6)


def test_zero_loss_gradient_gives_zero_gradients():
    w = parameter(np.ones((3, 2)))
    out = ops.dense(Tensor(np.ones((5, 3))), w)
    grads = backward(out, np.zeros(out.shape))
    assert not grads[w].any()


def test_backward_without_recorded_pass():
    with pytest.raises(TapeError):
        backward(Tensor(np.ones(3)))


def test_non_finite_results_are_rejected():
    with pytest.raises(NonFiniteError):
        ops.mul(Tensor(np.array([np.inf])), 0.0)


def test_shared_subexpression_accumulates():
    w = f64([2.0])
    out = ops.add(ops.mul(w, w), w)
    assert backward(out)[w][0] == pytest.approx(5.0)


def test_forward_is_deterministic():
    rng = np.random.default_rng(9)
    x, w = rng.normal(size=(2, 6, 6, 3)), rng.normal(size=(3, 3, 3, 4))
    first = ops.conv_forward(x.astype(np.float32), w.astype(np.float32)).data
    second = ops.conv_forward(x.astype(np.float32), w.astype(np.float32)).data
    assert np.array_equal(first, second)


class TestGradientCheck:
    rng = np.random.default_rng(42)

    def run(self, build, params):
        report = check_gradients(lambda: projected_loss(build()), params)
        assert report.pass_fraction >= 0.95, report

    def test_conv(self):
        x = f64(self.rng.normal(size=(2, 5, 5, 3)))
        w = f64(self.rng.normal(size=(3, 3, 3, 4)))
        b = f64(self.rng.normal(size=(4,)))
        self.run(lambda: ops.conv_forward(x, w, stride=2, bias=b), [x, w, b])

    def test_separable_conv(self):
        x = f64(self.rng.normal(size=(2, 5, 5, 3)))
        wd = f64(self.rng.normal(size=(3, 3, 3)))
        wp = f64(self.rng.normal(size=(1, 1, 3, 2)))
        self.run(lambda: ops.separable_conv_forward(x, wd, wp, padding="valid"), [x, wd, wp])

    def test_pools(self):
        x = f64(self.rng.normal(size=(2, 4, 6, 3)))
        self.run(lambda: ops.max_pool(x), [x])
        self.run(lambda: ops.avg_pool(x, kernel=(1, 2)), [x])
        self.run(lambda: ops.global_avg_pool(x), [x])

    def test_batch_norm(self):
        x = f64(self.rng.normal(size=(6, 2, 2, 3)))
        gamma = f64(self.rng.normal(size=(3,)))
        beta = f64(self.rng.normal(size=(3,)))
        self.run(lambda: ops.batch_norm_train(x, gamma, beta)[0], [x, gamma, beta])

    def test_activations_and_softmax(self):
        x = f64(self.rng.normal(size=(4, 5)))
        self.run(lambda: ops.relu(x), [x])
        self.run(lambda: ops.tanh(ops.sigmoid(x)), [x])
        self.run(lambda: ops.softmax(x), [x])

    def test_losses(self):
        logits = f64(self.rng.normal(size=(6, 4)))
        labels = np.array([0, 1, 2, 3, 1, 0])
        report = check_gradients(lambda: ops.softmax_cross_entropy(logits, labels), [logits])
        assert report.pass_fraction >= 0.95
        report = check_gradients(lambda: ops.mse(logits, np.zeros((6, 4))), [logits])
        assert report.pass_fraction >= 0.95

    def test_concat_and_embedding(self):
        a = f64(self.rng.normal(size=(2, 3, 3, 2)))
        b = f64(self.rng.normal(size=(2, 3, 3, 1)))
        self.run(lambda: ops.concat([a, b], axis=-1), [a, b])
        table = f64(self.rng.normal(size=(5, 3)))
        ids = np.array([[0, 4, 4], [1, 0, 2]])
        self.run(lambda: ops.embedding_lookup(table, ids), [table])
