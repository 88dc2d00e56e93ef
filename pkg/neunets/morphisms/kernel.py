import dataclasses
import logging

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind
from neunets.morphisms.errors import PreconditionError

logger = logging.getLogger(__name__)


def _aligned(extent: int, kernel: int, stride: int) -> bool:
    # with less input than the padded windows cover, same padding is clipped and shifts the centre
    out = -(-extent // stride)
    return (out - 1) * stride + kernel - extent >= 0


def widen_kernel(graph: NetworkGraph, layer_id: int, new_kernel: tuple[int, int]) -> NetworkGraph:
    """Grow the spatial kernel of a same-padded (separable) convolution by zero-padding it"""
    spec = graph.layer(layer_id)
    if spec.kind not in (LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION):
        raise PreconditionError(f"Cannot widen the kernel of a {spec.kind.value} layer")
    if spec.padding != "same":
        raise PreconditionError(f"Layer {layer_id} uses {spec.padding} padding, its output size would change")
    (k1, k2), (n1, n2) = spec.kernel, tuple(new_kernel)
    if n1 < k1 or n2 < k2:
        raise PreconditionError(f"Kernel {new_kernel} is smaller than {spec.kernel}")
    if (n1 - k1) % 2 or (n2 - k2) % 2:
        raise PreconditionError(f"Kernel {new_kernel} changes the parity of {spec.kernel}")
    h, w, _ = graph.input_shapes(layer_id)[0]
    s1, s2 = spec.stride
    if not (_aligned(h, k1, s1) and _aligned(w, k2, s2)):
        raise PreconditionError(f"Layer {layer_id} input {h}x{w} is too small for centred padding")

    result = graph.copy()
    name = "depthwise" if spec.kind == LayerKind.SEPARABLE_CONVOLUTION else "kernel"
    weights = result.weights[layer_id][name]
    p1, p2 = (n1 - k1) // 2, (n2 - k2) // 2
    pad = [(p1, p1), (p2, p2)] + [(0, 0)] * (weights.ndim - 2)
    result.weights[layer_id][name] = np.pad(weights, pad)
    result.replace_layer(dataclasses.replace(spec, kernel=(n1, n2)))
    logger.debug(f"Kernel of layer {layer_id} widened from {spec.kernel} to {(n1, n2)}")
    result.validate()
    return result
