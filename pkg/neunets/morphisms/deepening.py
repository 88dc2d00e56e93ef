import logging
from typing import Optional

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.morphisms.errors import ForbiddenPositionError, PreconditionError
from neunets.morphisms.placement import INHERIT_CELL, produces_nonnegative, resolve_cell, rewire_consumers

logger = logging.getLogger(__name__)


def identity_weights(kind: LayerKind, kernel: tuple[int, int], channels: int) -> dict[str, np.ndarray]:
    """Weights of a same-padded convolution that copies its input"""
    k1, k2 = kernel
    c1, c2 = k1 // 2, k2 // 2
    bias = np.zeros(channels, dtype=np.float32)
    if kind == LayerKind.SEPARABLE_CONVOLUTION:
        depthwise = np.zeros((k1, k2, channels), dtype=np.float32)
        depthwise[c1, c2, :] = 1.0
        pointwise = np.eye(channels, dtype=np.float32).reshape(1, 1, channels, channels)
        return {"depthwise": depthwise, "pointwise": pointwise, "bias": bias}
    kernel_weights = np.zeros((k1, k2, channels, channels), dtype=np.float32)
    kernel_weights[c1, c2] = np.eye(channels, dtype=np.float32)
    return {"kernel": kernel_weights, "bias": bias}


def deepen(
    graph: NetworkGraph,
    position: int,
    kernel: tuple[int, int] = (3, 3),
    separable: bool = False,
    cell: Optional[int] = INHERIT_CELL,
) -> NetworkGraph:
    """Insert an identity-initialized ReLU convolution right after layer `position`

    ReLU(identity(x)) == x only holds when x is already nonnegative, so the insertion point must
    follow a ReLU (or an equivalent nonnegative output).

    :raises ForbiddenPositionError: directly after an input that may be negative
    :raises PreconditionError: on even kernels or inputs that are not [h, w, c] maps
    """
    k1, k2 = kernel
    if k1 % 2 == 0 or k2 % 2 == 0:
        raise PreconditionError(f"Identity kernels need odd sizes, got {kernel}")
    shape = graph.shapes()[position]
    if len(shape) != 3:
        raise PreconditionError(f"Layer {position} output {shape} is not a feature map")
    if not produces_nonnegative(graph, position):
        if graph.layer(position).kind in (LayerKind.INPUT, LayerKind.EMBEDDING):
            raise ForbiddenPositionError(f"No identity convolution exists after layer {position}: its values may be negative")
        raise PreconditionError(f"Layer {position} may produce negative values, ReLU would not be the identity")

    channels = shape[-1]
    kind = LayerKind.SEPARABLE_CONVOLUTION if separable else LayerKind.CONVOLUTION
    result = graph.copy()
    new_id = result.next_id()
    rewire_consumers(result, position, new_id)
    result.layers.append(
        LayerSpec(
            id=new_id,
            kind=kind,
            inputs=(position,),
            kernel=(k1, k2),
            channels=channels,
            activation="relu",
            cell=resolve_cell(graph, position, cell),
        )
    )
    result.weights[new_id] = identity_weights(kind, kernel, channels)
    logger.debug(f"Deepened after layer {position} with {kind.value} {new_id} ({k1}x{k2}, {channels} channels)")
    result.validate()
    return result
