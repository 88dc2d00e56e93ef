"""The chain search space of the accuracy predictor

A chain is a sequence of elements; residual blocks and skip connections are single elements
that expand into several layers when decoded.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph, build_graph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.tensor import ops

logger = logging.getLogger(__name__)


class ElementKind(enum.Enum):
    CONVOLUTION = "convolution"
    POOLING = "pooling"
    BATCH_NORM = "batch_norm"
    DROPOUT = "dropout"
    RESIDUAL = "residual"
    SKIP = "skip"
    FULLY_CONNECTED = "fully_connected"


SPATIAL_KINDS = (
    ElementKind.CONVOLUTION,
    ElementKind.POOLING,
    ElementKind.BATCH_NORM,
    ElementKind.DROPOUT,
    ElementKind.RESIDUAL,
    ElementKind.SKIP,
    ElementKind.FULLY_CONNECTED,
)
DENSE_KINDS = (ElementKind.FULLY_CONNECTED, ElementKind.DROPOUT)
MIN_RECEPTIVE_FIELD = 3


@dataclass
class ChainElement:
    kind: ElementKind
    # receptive field along the sequence (text) or both axes (images)
    kernel: int = 1
    stride: int = 1
    padding: str = "same"
    # filters or units
    channels: int = 0
    rate: float = 0.5
    repeat: int = 1
    # element index whose output a skip connection adds
    source: int = -1


@dataclass
class ChainArchitecture:
    elements: list[ChainElement] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.elements)

    def prefix(self, length: int) -> ChainArchitecture:
        return ChainArchitecture(list(self.elements[:length]))


@dataclass
class ChainSpaceConfig:
    min_elements: int = 2
    max_elements: int = 8
    filters: tuple[int, ...] = (8, 16, 32, 64)
    units: tuple[int, ...] = (32, 64, 128)
    max_receptive_field: int = 256
    max_repeat: int = 6
    max_fully_connected: int = 2
    dropout_rates: tuple[float, ...] = (0.25, 0.5)
    embedding_dim: int = 32

    def __post_init__(self):
        if not 1 <= self.min_elements <= self.max_elements:
            raise ValueError(f"Invalid element range [{self.min_elements}, {self.max_elements}]")
        if self.max_receptive_field < MIN_RECEPTIVE_FIELD:
            raise ValueError(f"max_receptive_field must be >= {MIN_RECEPTIVE_FIELD}")


@dataclass
class DecodedChain:
    graph: NetworkGraph
    # layer ids per element, each ending with the element's output layer
    stages: list[list[int]]

    def output_of(self, index: int) -> int:
        return self.stages[index][-1]


def _window(meta: GraphMeta, size: int) -> tuple[int, int]:
    return (1, size) if meta.domain == "text" else (size, size)


def _extent(meta: GraphMeta, shape: tuple[int, ...]) -> int:
    """Largest receptive field that still fits the current feature map"""
    return shape[1] if meta.domain == "text" else min(shape[0], shape[1])


def _front_shape(meta: GraphMeta, embedding_dim: int) -> tuple[int, ...]:
    if meta.domain == "text":
        return (1, meta.input_shape[-1], embedding_dim)
    return tuple(meta.input_shape)


def _after(meta: GraphMeta, shape: tuple[int, ...], element: ChainElement) -> tuple[int, ...]:
    if element.kind == ElementKind.FULLY_CONNECTED:
        return (element.channels,)
    if element.kind == ElementKind.CONVOLUTION or element.kind == ElementKind.POOLING:
        (k1, k2), (s1, s2) = _window(meta, element.kernel), _window(meta, element.stride)
        padding = "valid" if element.kind == ElementKind.POOLING else element.padding
        channels = element.channels if element.kind == ElementKind.CONVOLUTION else shape[-1]
        return ops.conv_output_size(shape[0], k1, s1, padding), ops.conv_output_size(shape[1], k2, s2, padding), channels
    if element.kind == ElementKind.RESIDUAL:
        return shape[0], shape[1], element.channels
    return shape


def _receptive_field(rng: np.random.Generator, extent: int, config: ChainSpaceConfig) -> int:
    high = max(MIN_RECEPTIVE_FIELD, min(extent, config.max_receptive_field))
    return int(rng.integers(MIN_RECEPTIVE_FIELD, high + 1))


def _sample_element(
    rng: np.random.Generator,
    kind: ElementKind,
    meta: GraphMeta,
    shape: tuple[int, ...],
    shapes: list[tuple[int, ...]],
    config: ChainSpaceConfig,
) -> ChainElement:
    if kind == ElementKind.FULLY_CONNECTED:
        return ChainElement(kind, channels=int(rng.choice(config.units)))
    if kind == ElementKind.DROPOUT:
        return ChainElement(kind, rate=float(rng.choice(config.dropout_rates)))
    if kind == ElementKind.BATCH_NORM:
        return ChainElement(kind)
    extent = _extent(meta, shape)
    if kind == ElementKind.CONVOLUTION:
        kernel = _receptive_field(rng, extent, config)
        padding = "valid" if kernel <= extent and rng.integers(2) else "same"
        return ChainElement(kind, kernel=kernel, stride=int(rng.integers(1, 3)), padding=padding, channels=int(rng.choice(config.filters)))
    if kind == ElementKind.POOLING:
        return ChainElement(kind, kernel=_receptive_field(rng, extent, config), stride=int(rng.integers(1, 3)), padding="valid")
    if kind == ElementKind.RESIDUAL:
        # residual blocks keep or shrink the width, shrinking needs a projection shortcut
        narrower = [f for f in config.filters if f <= shape[-1]]
        channels = int(rng.choice(narrower)) if narrower else shape[-1]
        return ChainElement(
            kind, kernel=_receptive_field(rng, extent, config), channels=channels, repeat=int(rng.integers(1, config.max_repeat + 1))
        )
    # never the element that produced the current map
    targets = [j for j, s in enumerate(shapes[:-1]) if s == shape and len(s) == 3]
    return ChainElement(kind, source=int(rng.choice(targets)))


def _allowed(meta: GraphMeta, shape: tuple[int, ...], shapes: list[tuple[int, ...]], dense_used: int, config: ChainSpaceConfig):
    if len(shape) == 1:
        kinds = list(DENSE_KINDS)
    else:
        kinds = list(SPATIAL_KINDS)
        if _extent(meta, shape) < MIN_RECEPTIVE_FIELD:
            kinds.remove(ElementKind.POOLING)
        if not any(s == shape for s in shapes[:-1]):
            kinds.remove(ElementKind.SKIP)
    if dense_used >= config.max_fully_connected:
        kinds.remove(ElementKind.FULLY_CONNECTED)
    return kinds


def sample_chain(
    meta: GraphMeta, rng: Union[int, np.random.Generator], config: Optional[ChainSpaceConfig] = None
) -> ChainArchitecture:
    """A random legal chain for inputs described by `meta`

    Element kinds are drawn uniformly among those legal at the current feature map; once a
    fully connected element flattens the map only dense elements follow.
    """
    config = config or ChainSpaceConfig()
    rng = np.random.default_rng(rng)
    length = int(rng.integers(config.min_elements, config.max_elements + 1))
    shape = _front_shape(meta, config.embedding_dim)
    shapes: list[tuple[int, ...]] = []
    elements: list[ChainElement] = []
    dense_used = 0
    while len(elements) < length:
        kinds = _allowed(meta, shape, shapes, dense_used, config)
        if not kinds:
            break
        kind = kinds[rng.integers(len(kinds))]
        element = _sample_element(rng, kind, meta, shape, shapes, config)
        shape = _after(meta, shape, element)
        shapes.append(shape)
        elements.append(element)
        dense_used += kind == ElementKind.FULLY_CONNECTED
    logger.debug(f"Sampled chain {[e.kind.value for e in elements]}")
    return ChainArchitecture(elements)


class _Builder:
    def __init__(self, meta: GraphMeta):
        self.meta = meta
        self.layers: list[LayerSpec] = []

    def add(self, kind: LayerKind, inputs: tuple[int, ...], **hyperparameters) -> int:
        lid = len(self.layers)
        self.layers.append(LayerSpec(id=lid, kind=kind, inputs=inputs, **hyperparameters))
        return lid


def _residual(builder: _Builder, meta: GraphMeta, previous: int, in_channels: int, element: ChainElement) -> list[int]:
    window = _window(meta, element.kernel)
    ids = []
    for _ in range(element.repeat):
        shortcut = previous
        if element.channels < in_channels:
            shortcut = builder.add(LayerKind.CONVOLUTION, (previous,), kernel=(1, 1), channels=element.channels)
            ids.append(shortcut)
        first = builder.add(LayerKind.CONVOLUTION, (previous,), kernel=window, channels=element.channels)
        first_bn = builder.add(LayerKind.BATCH_NORM, (first,))
        first_relu = builder.add(LayerKind.RELU, (first_bn,))
        second = builder.add(LayerKind.CONVOLUTION, (first_relu,), kernel=window, channels=element.channels)
        second_bn = builder.add(LayerKind.BATCH_NORM, (second,))
        merge = builder.add(LayerKind.ADD, (second_bn, shortcut))
        previous = builder.add(LayerKind.RELU, (merge,))
        ids.extend([first, first_bn, first_relu, second, second_bn, merge, previous])
        in_channels = element.channels
    return ids


def decode_chain(
    chain: ChainArchitecture,
    meta: GraphMeta,
    rng: Union[int, np.random.Generator] = 0,
    embedding_dim: int = 32,
    initialize: bool = True,
) -> DecodedChain:
    """Layers of a chain, followed by global pooling (for feature maps) and the classifier head

    With `initialize` off the graph carries no weights, which is enough for shapes and costs.

    :raises ShapeError: if an element does not fit the feature map it receives
    """
    builder = _Builder(meta)
    previous = builder.add(LayerKind.INPUT, (), shape=tuple(meta.input_shape))
    if meta.domain == "text":
        previous = builder.add(LayerKind.EMBEDDING, (previous,), channels=embedding_dim, vocab=meta.vocab_size)
    shape = _front_shape(meta, embedding_dim)
    stages: list[list[int]] = []
    for element in chain.elements:
        if element.kind == ElementKind.CONVOLUTION:
            ids = [
                builder.add(
                    LayerKind.CONVOLUTION,
                    (previous,),
                    kernel=_window(meta, element.kernel),
                    stride=_window(meta, element.stride),
                    padding=element.padding,
                    channels=element.channels,
                    activation="relu",
                )
            ]
        elif element.kind == ElementKind.POOLING:
            window = _window(meta, element.kernel)
            ids = [builder.add(LayerKind.MAX_POOL, (previous,), kernel=window, stride=_window(meta, element.stride), padding="valid")]
        elif element.kind == ElementKind.BATCH_NORM:
            ids = [builder.add(LayerKind.BATCH_NORM, (previous,))]
        elif element.kind == ElementKind.DROPOUT:
            ids = [builder.add(LayerKind.DROPOUT, (previous,), rate=element.rate)]
        elif element.kind == ElementKind.RESIDUAL:
            ids = _residual(builder, meta, previous, shape[-1], element)
        elif element.kind == ElementKind.SKIP:
            ids = [builder.add(LayerKind.ADD, (previous, stages[element.source][-1]))]
        else:
            ids = []
            if len(shape) == 3:
                previous = builder.add(LayerKind.GLOBAL_AVG_POOL, (previous,))
                ids.append(previous)
            ids.append(builder.add(LayerKind.FULLY_CONNECTED, (previous,), channels=element.channels, activation="relu"))
        previous = ids[-1]
        shape = _after(meta, shape, element)
        stages.append(ids)

    if len(shape) == 3:
        previous = builder.add(LayerKind.GLOBAL_AVG_POOL, (previous,))
    logits = builder.add(LayerKind.FULLY_CONNECTED, (previous,), channels=meta.n_classes)
    builder.add(LayerKind.SOFTMAX, (logits,))
    if initialize:
        graph = build_graph(builder.layers, meta, rng)
    else:
        graph = NetworkGraph(builder.layers, meta)
        graph.validate_structure()
        graph.shapes()
    return DecodedChain(graph=graph, stages=stages)
