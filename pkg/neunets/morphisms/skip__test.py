import numpy as np
import pytest

from neunets.arch.graph import GraphMeta, parameter_tensors, run_graph
from neunets.arch.layers import ForwardContext, LayerKind
from neunets.arch.template import NeuroCell, TemplateConfig, instantiate_template
from neunets.morphisms.skip import SkipConvSpec, insert_skip
from neunets.morphisms.verify import verify_function_preserving
from neunets.tensor import ops
from neunets.tensor.autograd import ShapeError, backward


@pytest.fixture
def graph():
    meta = GraphMeta(input_shape=(8, 8, 3), n_classes=3)
    return instantiate_template(NeuroCell.initial(4), meta, TemplateConfig(slots=2, head_units=8), rng=1)


def test_around_a_hidden_layer(graph):
    skipped = insert_skip(graph, 1)
    conv_id, add_id = graph.next_id(), graph.next_id() + 1
    assert skipped.layer(add_id).kind == LayerKind.ADD
    assert skipped.layer(add_id).inputs == (1, conv_id)
    assert skipped.layer(add_id).activation == "relu"
    assert skipped.consumers(1) == [conv_id, add_id]
    assert verify_function_preserving(graph, skipped).passed


def test_around_a_signed_input(graph):
    skipped = insert_skip(graph, graph.input_id, SkipConvSpec(kernel=(1, 1)))
    assert skipped.layer(graph.next_id() + 1).activation is None
    assert verify_function_preserving(graph, skipped).passed


def test_separable_path(graph):
    assert verify_function_preserving(graph, insert_skip(graph, 3, SkipConvSpec(separable=True))).passed


def test_channel_mismatch(graph):
    with pytest.raises(ShapeError):
        insert_skip(graph, 1, SkipConvSpec(channels=5))


def test_zero_path_still_learns(graph):
    skipped = insert_skip(graph, 1)
    conv_id = graph.next_id()
    x = np.random.default_rng(0).normal(size=(6, 8, 8, 3)).astype(np.float32)
    labels = np.arange(6) % 3

    def gradients(network):
        params = parameter_tensors(network)
        out = run_graph(network, x, params, ForwardContext(training=True))[network.logits_id]
        grads = backward(ops.softmax_cross_entropy(out, labels))
        return {lid: {name: grads[t] for name, t in tensors.items()} for lid, tensors in params.items()}

    first = gradients(skipped)
    assert np.count_nonzero(first[conv_id]["kernel"]) > 0
    assert np.count_nonzero(first[1]["kernel"]) > 0

    stepped = skipped.copy()
    for lid, grads in first.items():
        for name, grad in grads.items():
            stepped.weights[lid][name] = stepped.weights[lid][name] - 0.1 * grad
    second = gradients(stepped)
    assert np.count_nonzero(second[conv_id]["kernel"]) > 0
    assert np.count_nonzero(second[1]["kernel"]) > 0
