"""Four network representations searched jointly with the learning hyperparameters

Every representation stacks components; a component ends with a pooling layer unless the
feature map is too small to pool. A plain chain holds convolution stacks only, a skip chain adds
skip edges inside a component, a multi-branch network repeats one two-branch cell and a
hierarchy network expands a motif built from smaller motifs.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph, build_graph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.tensor.optim import OptimizerConfig, OptimizerKind

logger = logging.getLogger(__name__)

CONV_KINDS = ("convolution", "separable_convolution")
# operations on a branch of the multi-branch cell
BRANCH_OPS = ("identity", "conv3", "conv5", "separable3", "separable5")
# level-1 operations of the hierarchy; every one keeps the feature map shape
PRIMITIVES = ("identity", "conv1", "conv3", "separable3")


class Representation(enum.Enum):
    PLAIN_CHAIN = "plain_chain"
    SKIP_CHAIN = "skip_chain"
    MULTI_BRANCH = "multi_branch"
    HIERARCHY = "hierarchy"


@dataclass
class ConvStack:
    kernel: int
    kind: str
    channels: int


@dataclass
class Skip:
    # stack indices inside one component, source < target
    source: int
    target: int


@dataclass
class Component:
    stacks: list[ConvStack] = field(default_factory=list)
    skips: list[Skip] = field(default_factory=list)


@dataclass
class BranchNode:
    # 0 is the cell input, k > 0 the output of node k - 1
    inputs: tuple[int, int]
    ops: tuple[str, str]


@dataclass
class BranchCell:
    channels: int
    nodes: list[BranchNode]


@dataclass
class MotifEdge:
    source: int
    target: int
    # index into the operations of the level below
    op: int


@dataclass
class Motif:
    """A DAG over `nodes` nodes; node 0 is the input, the last node the output"""

    nodes: int
    edges: list[MotifEdge]


@dataclass
class Hierarchy:
    channels: int
    level2: list[Motif]
    level3: Motif


@dataclass
class LearningConfig:
    learning_rate: float
    weight_decay: float
    momentum: float
    batch_size: int = 64


@dataclass
class HyperbandConfig:
    """One point of the joint space: a network description and its learning hyperparameters"""

    representation: Representation
    learning: LearningConfig
    components: list[Component] = field(default_factory=list)
    cell: Optional[BranchCell] = None
    hierarchy: Optional[Hierarchy] = None
    # repetitions of the cell or the top motif, one component each
    repeats: int = 1

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            kind=OptimizerKind.SGD_MOMENTUM,
            learning_rate=self.learning.learning_rate,
            momentum=self.learning.momentum,
            weight_decay=self.learning.weight_decay,
            batch_size=self.learning.batch_size,
        )


@dataclass
class HyperbandSpace:
    components: tuple[int, int] = (1, 3)
    stacks: tuple[int, int] = (1, 3)
    kernels: tuple[int, ...] = (1, 3, 5)
    conv_kinds: tuple[str, ...] = CONV_KINDS
    channels: tuple[int, ...] = (8, 16, 32)
    learning_rate: tuple[float, float] = (1e-3, 1e-1)
    weight_decay: tuple[float, ...] = (0.0, 1e-5, 1e-4, 1e-3)
    momentum: tuple[float, float] = (0.5, 0.95)
    batch_size: int = 64
    branch_nodes: int = 3
    level2_motifs: int = 4
    level2_nodes: int = 3
    level3_nodes: int = 3
    embedding_dim: int = 32

    def __post_init__(self):
        if not 1 <= self.components[0] <= self.components[1]:
            raise ValueError(f"Invalid component range {self.components}")
        if not 1 <= self.stacks[0] <= self.stacks[1]:
            raise ValueError(f"Invalid stack range {self.stacks}")
        if not 0 < self.learning_rate[0] <= self.learning_rate[1]:
            raise ValueError(f"Invalid learning rate range {self.learning_rate}")
        if self.level2_motifs < 1 or self.level2_nodes < 2 or self.level3_nodes < 2 or self.branch_nodes < 1:
            raise ValueError("Motifs and cells need at least one operation")


def _between(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1] + 1))


def _sample_learning(space: HyperbandSpace, rng: np.random.Generator) -> LearningConfig:
    low, high = math.log(space.learning_rate[0]), math.log(space.learning_rate[1])
    return LearningConfig(
        learning_rate=float(math.exp(rng.uniform(low, high))),
        weight_decay=float(rng.choice(space.weight_decay)),
        momentum=float(rng.uniform(*space.momentum)),
        batch_size=space.batch_size,
    )


def _sample_stack(space: HyperbandSpace, rng: np.random.Generator) -> ConvStack:
    return ConvStack(
        kernel=int(rng.choice(space.kernels)), kind=str(rng.choice(space.conv_kinds)), channels=int(rng.choice(space.channels))
    )


def _sample_components(space: HyperbandSpace, rng: np.random.Generator, skips: bool) -> list[Component]:
    components = []
    for _ in range(_between(rng, space.components)):
        stacks = [_sample_stack(space, rng) for _ in range(_between(rng, space.stacks))]
        pairs = [Skip(i, j) for i in range(len(stacks)) for j in range(i + 1, len(stacks))]
        chosen = [pair for pair in pairs if skips and rng.random() < 0.5]
        components.append(Component(stacks, chosen))
    return components


def _sample_motif(rng: np.random.Generator, nodes: int, n_ops: int) -> Motif:
    """Every node but the input gets an edge from its predecessor and maybe from earlier nodes"""
    edges = []
    for target in range(1, nodes):
        edges.append(MotifEdge(target - 1, target, int(rng.integers(n_ops))))
        for source in range(target - 1):
            if rng.random() < 0.5:
                edges.append(MotifEdge(source, target, int(rng.integers(n_ops))))
    return Motif(nodes, edges)


def sample_config(
    space: HyperbandSpace, representation: Representation, rng: Union[int, np.random.Generator]
) -> HyperbandConfig:
    rng = np.random.default_rng(rng)
    learning = _sample_learning(space, rng)
    if representation in (Representation.PLAIN_CHAIN, Representation.SKIP_CHAIN):
        components = _sample_components(space, rng, skips=representation == Representation.SKIP_CHAIN)
        return HyperbandConfig(representation, learning, components=components)
    repeats = _between(rng, space.components)
    if representation == Representation.MULTI_BRANCH:
        nodes = []
        for k in range(space.branch_nodes):
            inputs = (int(rng.integers(k + 1)), int(rng.integers(k + 1)))
            ops = (str(rng.choice(BRANCH_OPS)), str(rng.choice(BRANCH_OPS)))
            nodes.append(BranchNode(inputs, ops))
        cell = BranchCell(channels=int(rng.choice(space.channels)), nodes=nodes)
        return HyperbandConfig(representation, learning, cell=cell, repeats=repeats)
    level2 = [_sample_motif(rng, space.level2_nodes, len(PRIMITIVES)) for _ in range(space.level2_motifs)]
    hierarchy = Hierarchy(
        channels=int(rng.choice(space.channels)), level2=level2, level3=_sample_motif(rng, space.level3_nodes, space.level2_motifs)
    )
    return HyperbandConfig(representation, learning, hierarchy=hierarchy, repeats=repeats)


class _Builder:
    def __init__(self, meta: GraphMeta):
        self.meta = meta
        self.layers: list[LayerSpec] = []

    def add(self, kind: LayerKind, inputs: tuple[int, ...], **hyperparameters) -> int:
        lid = len(self.layers)
        self.layers.append(LayerSpec(id=lid, kind=kind, inputs=inputs, **hyperparameters))
        return lid

    def window(self, size: int) -> tuple[int, int]:
        return (1, size) if self.meta.domain == "text" else (size, size)

    def conv(self, previous: int, kernel: int, channels: int, kind: str = "convolution", activation: Optional[str] = "relu") -> int:
        return self.add(LayerKind(kind), (previous,), kernel=self.window(kernel), channels=channels, activation=activation)

    def merge(self, ids: list[int]) -> int:
        """Sums the layers pairwise, left to right"""
        total = ids[0]
        for other in ids[1:]:
            total = self.add(LayerKind.ADD, (total, other))
        return total


def _pool(builder: _Builder, previous: int, shape: tuple[int, int]) -> tuple[int, tuple[int, int]]:
    """Closes a component; maps too small to halve stay as they are"""
    h, w = shape
    window = (1 if h < 2 else 2, 1 if w < 2 else 2)
    if window == (1, 1):
        return previous, shape
    return builder.add(LayerKind.MAX_POOL, (previous,), kernel=window, stride=window), (h // window[0], w // window[1])


def _branch_op(builder: _Builder, op: str, source: int, channels: int) -> int:
    if op == "identity":
        return source
    kind = "separable_convolution" if op.startswith("separable") else "convolution"
    return builder.conv(source, int(op[-1]), channels, kind)


def _primitive(builder: _Builder, op: int, source: int, channels: int) -> int:
    name = PRIMITIVES[op]
    if name == "identity":
        return source
    kind = "separable_convolution" if name.startswith("separable") else "convolution"
    return builder.conv(source, int(name[-1]), channels, kind)


def expand_motif(builder: _Builder, motif: Motif, source: int, expand_edge) -> int:
    """Wires a motif DAG after layer `source`; `expand_edge(op, input)` builds one edge"""
    outputs = {0: source}
    for target in range(1, motif.nodes):
        incoming = [expand_edge(edge.op, outputs[edge.source]) for edge in motif.edges if edge.target == target]
        outputs[target] = builder.merge(incoming)
    return outputs[motif.nodes - 1]


def decode_config(
    config: HyperbandConfig, meta: GraphMeta, rng: Union[int, np.random.Generator] = 0, embedding_dim: int = 32
) -> NetworkGraph:
    """
    :raises ShapeError: if the description does not fit `meta`
    """
    builder = _Builder(meta)
    previous = builder.add(LayerKind.INPUT, (), shape=tuple(meta.input_shape))
    if meta.domain == "text":
        previous = builder.add(LayerKind.EMBEDDING, (previous,), channels=embedding_dim, vocab=meta.vocab_size)
        shape = (1, meta.input_shape[-1])
    else:
        shape = (meta.input_shape[0], meta.input_shape[1])

    if config.representation in (Representation.PLAIN_CHAIN, Representation.SKIP_CHAIN):
        for component in config.components:
            outputs = []
            for index, stack in enumerate(component.stacks):
                previous = builder.conv(previous, stack.kernel, stack.channels, stack.kind)
                for skip in component.skips:
                    if skip.target != index:
                        continue
                    source = outputs[skip.source]
                    if component.stacks[skip.source].channels != stack.channels:
                        source = builder.conv(source, 1, stack.channels, activation=None)
                    previous = builder.add(LayerKind.ADD, (previous, source))
                outputs.append(previous)
            previous, shape = _pool(builder, previous, shape)
    elif config.representation == Representation.MULTI_BRANCH:
        cell = config.cell
        for _ in range(config.repeats):
            stem = builder.conv(previous, 1, cell.channels)
            nodes = [stem]
            for node in cell.nodes:
                branches = [_branch_op(builder, op, nodes[i], cell.channels) for i, op in zip(node.inputs, node.ops)]
                nodes.append(builder.add(LayerKind.ADD, tuple(branches)))
            used = {i for node in cell.nodes for i in node.inputs}
            loose = [nodes[k] for k in range(1, len(nodes)) if k not in used]
            previous = loose[0] if len(loose) == 1 else builder.add(LayerKind.CONCAT, tuple(loose))
            previous, shape = _pool(builder, previous, shape)
    else:
        hierarchy = config.hierarchy

        def level2(op: int, source: int) -> int:
            return expand_motif(builder, hierarchy.level2[op], source, lambda p, s: _primitive(builder, p, s, hierarchy.channels))

        for _ in range(config.repeats):
            stem = builder.conv(previous, 1, hierarchy.channels)
            previous = expand_motif(builder, hierarchy.level3, stem, level2)
            previous, shape = _pool(builder, previous, shape)

    previous = builder.add(LayerKind.GLOBAL_AVG_POOL, (previous,))
    logits = builder.add(LayerKind.FULLY_CONNECTED, (previous,), channels=meta.n_classes)
    builder.add(LayerKind.SOFTMAX, (logits,))
    return build_graph(builder.layers, meta, rng)


def sample_network(
    space: HyperbandSpace, representation: Representation, meta: GraphMeta, rng: Union[int, np.random.Generator]
) -> tuple[NetworkGraph, OptimizerConfig]:
    rng = np.random.default_rng(rng)
    config = sample_config(space, representation, rng)
    return decode_config(config, meta, rng, space.embedding_dim), config.optimizer()
