import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.morphisms.errors import PreconditionError
from neunets.morphisms.placement import INHERIT_CELL, produces_nonnegative, resolve_cell, rewire_consumers
from neunets.tensor.autograd import ShapeError

logger = logging.getLogger(__name__)


@dataclass
class SkipConvSpec:
    """The convolution on the added path; `channels` defaults to the skipped tensor's width"""

    kernel: tuple[int, int] = (3, 3)
    channels: Optional[int] = None
    separable: bool = False


def insert_skip(
    graph: NetworkGraph,
    source: int,
    conv: Optional[SkipConvSpec] = None,
    cell: Optional[int] = INHERIT_CELL,
) -> NetworkGraph:
    """Add a zero-initialized convolution next to `source` and sum both paths

    Every former consumer of `source` reads the sum, which equals `source` until the new
    convolution is trained. The sum keeps a ReLU when `source` is nonnegative.

    :raises ShapeError: if the convolution would not produce the skipped tensor's shape
    """
    conv = conv or SkipConvSpec()
    k1, k2 = conv.kernel
    if k1 % 2 == 0 or k2 % 2 == 0:
        raise PreconditionError(f"Skip convolutions need odd kernels, got {conv.kernel}")
    shape = graph.shapes()[source]
    if len(shape) != 3:
        raise PreconditionError(f"Layer {source} output {shape} is not a feature map")
    channels = shape[-1] if conv.channels is None else conv.channels
    if channels != shape[-1]:
        raise ShapeError(f"A {channels}-filter convolution cannot be added to the {shape[-1]} channels of layer {source}")

    kind = LayerKind.SEPARABLE_CONVOLUTION if conv.separable else LayerKind.CONVOLUTION
    target_cell = resolve_cell(graph, source, cell)
    result = graph.copy()
    conv_id = result.next_id()
    add_id = conv_id + 1
    rewire_consumers(result, source, add_id)
    result.layers.append(LayerSpec(id=conv_id, kind=kind, inputs=(source,), kernel=(k1, k2), channels=channels, cell=target_cell))
    result.layers.append(
        LayerSpec(
            id=add_id,
            kind=LayerKind.ADD,
            inputs=(source, conv_id),
            activation="relu" if produces_nonnegative(graph, source) else None,
            cell=target_cell,
        )
    )
    if kind == LayerKind.SEPARABLE_CONVOLUTION:
        result.weights[conv_id] = {
            "depthwise": np.zeros((k1, k2, channels), dtype=np.float32),
            "pointwise": np.zeros((1, 1, channels, channels), dtype=np.float32),
            "bias": np.zeros(channels, dtype=np.float32),
        }
    else:
        result.weights[conv_id] = {
            "kernel": np.zeros((k1, k2, channels, channels), dtype=np.float32),
            "bias": np.zeros(channels, dtype=np.float32),
        }
    logger.debug(f"Skip connection around layer {source}: convolution {conv_id}, merge {add_id}")
    result.validate()
    return result
