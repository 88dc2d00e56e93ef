"""Per-layer feature vectors fed to the accuracy predictor

Every chain element is described by its type, how it changes the feature map, its weights and
the costs of the sub-network that ends with it. The predictor always sees two consecutive
layers: the last one whose accuracy is known and the next one, whose accuracy field is zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from neunets.arch.costs import count_costs
from neunets.arch.graph import GraphMeta
from neunets.arch.layers import LayerKind, UnknownLayerError
from neunets.search.tapas.space import ChainArchitecture, ElementKind, decode_chain

INPUT_TYPE = "input"
LAYER_TYPES = (INPUT_TYPE,) + tuple(kind.value for kind in ElementKind)
NUMERIC_FEATURES = ("height_ratio", "depth_ratio", "weights", "layers", "inference_flops", "inference_memory", "accuracy")
FEATURES = LAYER_TYPES + NUMERIC_FEATURES
N_FEATURES = len(FEATURES)
ACCURACY = FEATURES.index("accuracy")


def one_hot(layer_type: str) -> np.ndarray:
    if layer_type not in LAYER_TYPES:
        raise UnknownLayerError(f"Cannot encode layer type {layer_type!r}")
    vector = np.zeros(len(LAYER_TYPES))
    vector[LAYER_TYPES.index(layer_type)] = 1.0
    return vector


def _height_depth(shape: Sequence[int]) -> tuple[int, int]:
    # flat vectors count as height 1
    return (shape[0], shape[-1]) if len(shape) == 3 else (1, shape[-1])


@dataclass
class ChainEncoding:
    """Feature rows of the input layer and every element, accuracy fields still zero"""

    rows: np.ndarray  # [n + 1, N_FEATURES]

    def __len__(self) -> int:
        return len(self.rows) - 1

    def pair(self, index: int, accuracy: float) -> np.ndarray:
        """Rows of layer `index` carrying its accuracy and of layer `index + 1` carrying zero"""
        pair = self.rows[index : index + 2].copy()
        pair[0, ACCURACY] = accuracy
        pair[1, ACCURACY] = 0.0
        return pair


def encode_chain(chain: ChainArchitecture, meta: GraphMeta, embedding_dim: int = 32) -> ChainEncoding:
    """
    :raises ShapeError: if the chain does not fit `meta`
    """
    decoded = decode_chain(chain, meta, embedding_dim=embedding_dim, initialize=False)
    graph = decoded.graph
    shapes = graph.shapes()
    # the input row describes the front end, the embedding for text
    embedding = [spec.id for spec in graph.layers if spec.kind == LayerKind.EMBEDDING]
    front = embedding[0] if embedding else graph.input_id
    outputs = [front] + [stage[-1] for stage in decoded.stages]
    types = [INPUT_TYPE] + [element.kind.value for element in chain.elements]

    rows = np.zeros((len(outputs), N_FEATURES))
    previous_params = 0
    previous_shape = shapes[outputs[0]]
    for i, (output, layer_type) in enumerate(zip(outputs, types)):
        costs = count_costs(graph, output)
        shape = shapes[output]
        (h_in, d_in), (h_out, d_out) = _height_depth(previous_shape), _height_depth(shape)
        rows[i, : len(LAYER_TYPES)] = one_hot(layer_type)
        rows[i, len(LAYER_TYPES) :] = [
            h_out / h_in,
            d_out / d_in,
            costs.params - previous_params,
            i,
            costs.inference_flops,
            costs.inference_memory,
            0.0,
        ]
        previous_params, previous_shape = costs.params, shape
    return ChainEncoding(rows)


def encode_pair(encoding: ChainEncoding, index: int, accuracy: float) -> np.ndarray:
    """Concatenated rows of layers `index` and `index + 1`"""
    return encoding.pair(index, accuracy).reshape(-1)


def initial_accuracy(n_classes: int) -> float:
    """Accuracy attributed to the bare input: guessing"""
    return 1.0 / n_classes
