import numpy as np

from neunets.finegrained.layer import BaseLayer, GrownLayer, WeightBuckets
from neunets.tensor.autograd import parameter
from neunets.tensor.gradcheck import check_gradients, projected_loss


def merged_layer(rng, dtype=np.float64, activation="linear"):
    n_inputs, hidden, m = 5, 4, 3
    mask = np.zeros((n_inputs, hidden), dtype=bool)
    inputs = np.array([[0, 1], [1, 3], [2, 4], [0, 4]])
    for h, row in enumerate(inputs):
        mask[row, h] = True
    return GrownLayer(
        hidden_kernel=rng.normal(size=(n_inputs, hidden)).astype(dtype) * mask,
        hidden_bias=rng.normal(size=hidden).astype(dtype),
        output_kernel=rng.normal(size=(hidden, m)).astype(dtype),
        output_bias=rng.normal(size=m).astype(dtype),
        mask=mask,
        initial_kernel=np.zeros((n_inputs, hidden), dtype=dtype),
        activation=activation,
        buckets=WeightBuckets(
            assignment=np.array([0, 1, 0, 1]), inputs=inputs, shared=rng.normal(size=(2, 2)).astype(dtype)
        ),
    )


def test_base_layer_forward_matches_numpy():
    rng = np.random.default_rng(0)
    layer = BaseLayer(rng.normal(size=(4, 2)).astype(np.float32), rng.normal(size=2).astype(np.float32))
    x = rng.normal(size=(6, 4)).astype(np.float32)
    out = layer.forward(layer.tensors(), x).data
    np.testing.assert_allclose(out, layer.outputs(x), atol=1e-4)
    assert layer.param_count() == 10


def test_tied_weights_are_written_out():
    layer = merged_layer(np.random.default_rng(1))
    kernel = layer.effective_kernel()
    shared = layer.buckets.shared.astype(np.float32)
    assert kernel[[0, 1], 0].tolist() == shared[0].tolist()
    assert kernel[[2, 4], 2].tolist() == shared[0].tolist()
    assert kernel[[1, 3], 1].tolist() == shared[1].tolist()
    assert np.count_nonzero(kernel) <= 8
    # four shared values, four hidden biases, 4 x 3 output weights and 3 output biases
    assert layer.param_count() == 4 + 4 + 12 + 3


def test_autograd_and_numpy_forward_agree():
    rng = np.random.default_rng(2)
    layer = merged_layer(rng, dtype=np.float32, activation="relu")
    x = rng.uniform(0, 1, size=(7, 5)).astype(np.float32)
    np.testing.assert_allclose(layer.forward(layer.tensors(), x).data, layer.outputs(x), atol=1e-4)


def test_tied_weight_gradients():
    rng = np.random.default_rng(3)
    layer = merged_layer(rng)
    params = {name: parameter(t.data, dtype=np.float64) for name, t in layer.tensors().items()}
    x = rng.normal(size=(6, 5))
    report = check_gradients(lambda: projected_loss(layer.forward(params, x)), list(params.values()), eps=1e-6)
    assert report.pass_fraction == 1.0


def test_masked_gradients():
    rng = np.random.default_rng(4)
    layer = merged_layer(rng)
    layer.buckets = None
    params = {name: parameter(t.data, dtype=np.float64) for name, t in layer.tensors().items()}
    x = rng.normal(size=(6, 5))
    report = check_gradients(lambda: projected_loss(layer.forward(params, x)), list(params.values()), eps=1e-6)
    assert report.pass_fraction == 1.0


def test_load_keeps_pruned_connections_at_zero():
    rng = np.random.default_rng(5)
    layer = merged_layer(rng, dtype=np.float32)
    layer.buckets = None
    params = layer.tensors()
    params["hidden_kernel"].data = params["hidden_kernel"].data + 1.0
    layer.load(params)
    assert not layer.hidden_kernel[~layer.mask].any()
