import dataclasses
from typing import Optional

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind

# marker for "put new layers into the cell of the layer they are attached to"
INHERIT_CELL = -1

# layers whose output carries the channel axis of their inputs unchanged
PASS_THROUGH_KINDS = frozenset(
    {
        LayerKind.RELU,
        LayerKind.BATCH_NORM,
        LayerKind.DROPOUT,
        LayerKind.MAX_POOL,
        LayerKind.AVG_POOL,
        LayerKind.GLOBAL_AVG_POOL,
        LayerKind.ADD,
    }
)


def resolve_cell(graph: NetworkGraph, anchor: int, cell: Optional[int]) -> Optional[int]:
    return graph.layer(anchor).cell if cell == INHERIT_CELL else cell


def rewire_consumers(graph: NetworkGraph, old: int, new: int, exclude: frozenset = frozenset()) -> None:
    """Every consumer of `old` (except `exclude`) reads `new` instead"""
    for consumer in graph.consumers(old):
        if consumer in exclude:
            continue
        spec = graph.layer(consumer)
        graph.replace_layer(dataclasses.replace(spec, inputs=tuple(new if i == old else i for i in spec.inputs)))


def produces_nonnegative(graph: NetworkGraph, layer_id: int) -> bool:
    """Whether every output value of the layer is >= 0 for every admissible network input"""
    spec = graph.layer(layer_id)
    if spec.kind == LayerKind.INPUT:
        return graph.meta.nonnegative_inputs
    if spec.kind in (LayerKind.RELU, LayerKind.SOFTMAX):
        return True
    if spec.kind in (LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION, LayerKind.FULLY_CONNECTED):
        return spec.activation == "relu"
    if spec.kind == LayerKind.ADD:
        return spec.activation == "relu" or all(produces_nonnegative(graph, i) for i in spec.inputs)
    if spec.kind in (
        LayerKind.MAX_POOL,
        LayerKind.AVG_POOL,
        LayerKind.GLOBAL_AVG_POOL,
        LayerKind.DROPOUT,
        LayerKind.CONCAT,
    ):
        return all(produces_nonnegative(graph, i) for i in spec.inputs)
    return False
