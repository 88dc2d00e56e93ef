import dataclasses
import logging
from typing import Optional

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.morphisms.errors import PreconditionError
from neunets.morphisms.placement import INHERIT_CELL, resolve_cell, rewire_consumers

logger = logging.getLogger(__name__)


def branch(graph: NetworkGraph, layer_id: int, cell: Optional[int] = INHERIT_CELL) -> NetworkGraph:
    """Split a convolution's filters into two parallel convolutions joined by a Concat

    The left branch keeps the layer id and the first o // 2 filters. No parameters are added.
    """
    spec = graph.layer(layer_id)
    if spec.kind != LayerKind.CONVOLUTION:
        raise PreconditionError(f"Only convolutions can be branched, layer {layer_id} is a {spec.kind.value}")
    if spec.channels < 2:
        raise PreconditionError(f"Layer {layer_id} has {spec.channels} filter, branching needs two")

    split = spec.channels // 2
    target_cell = resolve_cell(graph, layer_id, cell)
    result = graph.copy()
    right_id = result.next_id()
    concat_id = right_id + 1
    rewire_consumers(result, layer_id, concat_id)
    kernel, bias = result.weights[layer_id]["kernel"], result.weights[layer_id]["bias"]
    result.replace_layer(dataclasses.replace(spec, channels=split))
    result.weights[layer_id] = {"kernel": kernel[..., :split].copy(), "bias": bias[:split].copy()}
    result.layers.append(dataclasses.replace(spec, id=right_id, channels=spec.channels - split, cell=target_cell, local=None))
    result.weights[right_id] = {"kernel": kernel[..., split:].copy(), "bias": bias[split:].copy()}
    result.layers.append(LayerSpec(id=concat_id, kind=LayerKind.CONCAT, inputs=(layer_id, right_id), cell=target_cell))
    logger.debug(f"Branched layer {layer_id} into {layer_id} ({split}) and {right_id} ({spec.channels - split})")
    result.validate()
    return result
