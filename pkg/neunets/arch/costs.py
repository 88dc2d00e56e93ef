from __future__ import annotations

from dataclasses import dataclass

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import get_layer
from neunets.arch.ordering import ancestors

BYTES_PER_VALUE = 4


@dataclass
class Costs:
    """Counts for the sub-network that computes one layer

    One multiply-add counts as 2 FLOPs and every bias addition as 1. Inference memory is
    the bytes of all parameters plus all activations of one example, 32-bit each.
    """

    params: int
    inference_flops: int
    inference_memory: int


def count_costs(graph: NetworkGraph, up_to_layer: int) -> Costs:
    """
    :raises UnknownLayerError: if `up_to_layer` is not in the graph
    """
    graph.layer(up_to_layer)
    included = ancestors(graph.dependencies(), up_to_layer)
    shapes = graph.shapes()
    params = flops = activations = 0
    for spec in graph.layers:
        if spec.id not in included:
            continue
        layer = get_layer(spec.kind)
        input_shapes = [shapes[i] for i in spec.inputs]
        params += layer.param_count(spec, input_shapes)
        flops += layer.flops(spec, input_shapes, shapes[spec.id])
        size = 1
        for extent in shapes[spec.id]:
            size *= extent
        activations += size
    return Costs(params=params, inference_flops=flops, inference_memory=BYTES_PER_VALUE * (params + activations))


def total_costs(graph: NetworkGraph) -> Costs:
    return count_costs(graph, graph.output_id)
