import pytest

from neunets.arch.costs import count_costs
from neunets.arch.graph import GraphMeta, build_graph
from neunets.arch.layers import LayerKind, LayerSpec, UnknownLayerError


def conv_graph(kind):
    layers = [
        LayerSpec(0, LayerKind.INPUT, shape=(4, 4, 16)),
        LayerSpec(1, kind, inputs=(0,), kernel=(3, 3), channels=32),
        LayerSpec(2, LayerKind.GLOBAL_AVG_POOL, inputs=(1,)),
        LayerSpec(3, LayerKind.FULLY_CONNECTED, inputs=(2,), channels=2),
    ]
    return build_graph(layers, GraphMeta(input_shape=(4, 4, 16), n_classes=2), 0)


def test_fully_connected_params():
    layers = [LayerSpec(0, LayerKind.INPUT, shape=(4,)), LayerSpec(1, LayerKind.FULLY_CONNECTED, inputs=(0,), channels=3)]
    graph = build_graph(layers, GraphMeta(input_shape=(4,), n_classes=3), 0)
    costs = count_costs(graph, 1)
    assert costs.params == 15
    assert costs.inference_flops == (2 * 4 + 1) * 3
    assert costs.inference_memory == 4 * (15 + 4 + 3)


def test_convolution_params():
    assert count_costs(conv_graph(LayerKind.CONVOLUTION), 1).params == 4608 + 32


def test_separable_params():
    assert count_costs(conv_graph(LayerKind.SEPARABLE_CONVOLUTION), 1).params == 656 + 32


def test_convolution_flops():
    costs = count_costs(conv_graph(LayerKind.CONVOLUTION), 1)
    assert costs.inference_flops == 4 * 4 * 32 * (2 * 9 * 16 + 1)


def test_additive_over_sequential_composition():
    graph = conv_graph(LayerKind.CONVOLUTION)
    first, whole = count_costs(graph, 1), count_costs(graph, 3)
    gap = 4 * 4 * 32
    head = (2 * 32 + 1) * 2
    assert whole.params == first.params + 32 * 2 + 2
    assert whole.inference_flops == first.inference_flops + gap + head


def test_declared_count_matches_weights():
    graph = conv_graph(LayerKind.SEPARABLE_CONVOLUTION)
    assert count_costs(graph, graph.output_id).params == graph.param_count()


def test_unknown_layer():
    with pytest.raises(UnknownLayerError):
        count_costs(conv_graph(LayerKind.CONVOLUTION), 99)
