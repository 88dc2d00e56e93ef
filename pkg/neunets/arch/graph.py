from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from neunets.arch.layers import ForwardContext, LayerKind, LayerSpec, Shape, UnknownLayerError, get_layer
from neunets.arch.ordering import ancestors, topological_order
from neunets.errors import NeunetsError
from neunets.tensor import ops
from neunets.tensor.autograd import DTYPE, ShapeError, Tensor, as_tensor

WeightMap = dict[int, dict[str, np.ndarray]]


class InvalidGraphError(NeunetsError):
    pass


@dataclass
class GraphMeta:
    input_shape: tuple[int, ...]
    n_classes: int
    # standardized images and embeddings can be negative; raw pixel or count features cannot
    nonnegative_inputs: bool = False
    domain: str = "image"
    # embedding rows (vocabulary plus the unknown token) for text networks
    vocab_size: int = 0


@dataclass
class NetworkGraph:
    """Layer DAG with attached weights

    Graphs are treated as values: transformations copy before changing anything.
    `weights` hold trainable tensors, `buffers` the BatchNorm moving statistics.
    """

    layers: list[LayerSpec]
    meta: GraphMeta
    weights: WeightMap = field(default_factory=dict)
    buffers: WeightMap = field(default_factory=dict)

    def copy(self) -> NetworkGraph:
        return NetworkGraph(
            layers=list(self.layers),
            meta=dataclasses.replace(self.meta),
            weights={lid: {k: v.copy() for k, v in w.items()} for lid, w in self.weights.items()},
            buffers={lid: {k: v.copy() for k, v in b.items()} for lid, b in self.buffers.items()},
        )

    def layer(self, layer_id: int) -> LayerSpec:
        for spec in self.layers:
            if spec.id == layer_id:
                return spec
        raise UnknownLayerError(f"No layer with id {layer_id}")

    def has_layer(self, layer_id: int) -> bool:
        return any(spec.id == layer_id for spec in self.layers)

    def replace_layer(self, spec: LayerSpec) -> None:
        self.layers = [spec if s.id == spec.id else s for s in self.layers]

    def dependencies(self) -> dict[int, tuple[int, ...]]:
        return {spec.id: spec.inputs for spec in self.layers}

    def order(self) -> list[int]:
        return topological_order(self.dependencies())

    def ordered_layers(self) -> list[LayerSpec]:
        by_id = {spec.id: spec for spec in self.layers}
        return [by_id[lid] for lid in self.order()]

    def consumers(self, layer_id: int) -> list[int]:
        return sorted(spec.id for spec in self.layers if layer_id in spec.inputs)

    def next_id(self) -> int:
        return max(spec.id for spec in self.layers) + 1

    @property
    def input_id(self) -> int:
        inputs = [spec.id for spec in self.layers if spec.kind == LayerKind.INPUT]
        if len(inputs) != 1:
            raise InvalidGraphError(f"Expected one input layer, found {len(inputs)}")
        return inputs[0]

    @property
    def output_id(self) -> int:
        consumed = {lid for spec in self.layers for lid in spec.inputs}
        sinks = [spec.id for spec in self.layers if spec.id not in consumed]
        if len(sinks) != 1:
            raise InvalidGraphError(f"Expected a single output layer, found {sinks}")
        return sinks[0]

    @property
    def logits_id(self) -> int:
        """The layer feeding the final softmax"""
        out = self.layer(self.output_id)
        return out.inputs[0] if out.kind == LayerKind.SOFTMAX else out.id

    def shapes(self) -> dict[int, Shape]:
        result: dict[int, Shape] = {}
        for spec in self.ordered_layers():
            result[spec.id] = get_layer(spec.kind).output_shape(spec, [result[i] for i in spec.inputs])
        return result

    def input_shapes(self, layer_id: int, shapes: Optional[dict[int, Shape]] = None) -> list[Shape]:
        shapes = shapes or self.shapes()
        return [shapes[i] for i in self.layer(layer_id).inputs]

    def param_count(self) -> int:
        return sum(array.size for tensors in self.weights.values() for array in tensors.values())

    def depth(self) -> int:
        """Number of weighted layers"""
        return sum(1 for spec in self.layers if self.weights.get(spec.id))

    def cell_layers(self, slot: int) -> list[LayerSpec]:
        return [spec for spec in self.ordered_layers() if spec.cell == slot]

    def cell_slots(self) -> list[int]:
        return sorted({spec.cell for spec in self.layers if spec.cell is not None})

    def validate_structure(self) -> None:
        """
        :raises InvalidGraphError: on dangling inputs, wrong arity or a missing single output
        :raises CyclicGraphError: on cycles
        """
        ids = [spec.id for spec in self.layers]
        if len(ids) != len(set(ids)):
            raise InvalidGraphError("Duplicate layer ids")
        known = set(ids)
        for spec in self.layers:
            missing = [i for i in spec.inputs if i not in known]
            if missing:
                raise InvalidGraphError(f"Layer {spec.id} reads unknown layers {missing}")
            arity = get_layer(spec.kind).arity
            if arity is None and len(spec.inputs) < 2:
                raise InvalidGraphError(f"{spec.kind.value} layer {spec.id} needs at least two inputs")
            if arity is not None and len(spec.inputs) != arity:
                raise InvalidGraphError(f"{spec.kind.value} layer {spec.id} needs {arity} inputs, has {len(spec.inputs)}")
        # each raises on a malformed graph
        self.input_id
        self.output_id
        self.order()

    def validate(self) -> None:
        """Structure, shapes and weight shapes

        :raises ShapeError: on incompatible shapes or weights
        """
        self.validate_structure()
        shapes = self.shapes()
        if shapes[self.output_id] != (self.meta.n_classes,):
            raise ShapeError(f"Network output {shapes[self.output_id]} != ({self.meta.n_classes},)")
        for spec in self.layers:
            expected = get_layer(spec.kind).weight_shapes(spec, self.input_shapes(spec.id, shapes))
            actual = {name: array.shape for name, array in self.weights.get(spec.id, {}).items()}
            if actual != {name: tuple(shape) for name, shape in expected.items()}:
                raise ShapeError(f"Layer {spec.id} weights {actual} do not match {expected}")


def initialize_weights(graph: NetworkGraph, rng: Union[int, np.random.Generator], only_missing: bool = True) -> NetworkGraph:
    """Fresh weights (and BatchNorm buffers) for every layer that has none yet"""
    rng = np.random.default_rng(rng)
    result = graph.copy()
    shapes = result.shapes()
    for spec in result.ordered_layers():
        if only_missing and spec.id in result.weights:
            continue
        layer = get_layer(spec.kind)
        input_shapes = result.input_shapes(spec.id, shapes)
        weights = layer.init_weights(spec, input_shapes, rng)
        if weights:
            result.weights[spec.id] = weights
        buffers = layer.init_buffers(spec, input_shapes)
        if buffers:
            result.buffers[spec.id] = buffers
    return result


def build_graph(layers: Iterable[LayerSpec], meta: GraphMeta, rng: Union[int, np.random.Generator]) -> NetworkGraph:
    graph = NetworkGraph(list(layers), meta)
    graph.validate_structure()
    graph = initialize_weights(graph, rng)
    graph.validate()
    return graph


ParameterSet = dict[int, dict[str, Tensor]]


def parameter_tensors(graph: NetworkGraph, trainable: Optional[Iterable[int]] = None, dtype=DTYPE) -> ParameterSet:
    """Tensors over the graph weights; only layers in `trainable` (default all) require grads"""
    trainable = None if trainable is None else set(trainable)
    return {
        lid: {
            name: Tensor(array.copy(), requires_grad=trainable is None or lid in trainable, dtype=dtype)
            for name, array in tensors.items()
        }
        for lid, tensors in graph.weights.items()
    }


def _batched_input(graph: NetworkGraph, x) -> tuple[Tensor, bool]:
    x = as_tensor(x)
    expected = tuple(graph.meta.input_shape)
    if x.shape == expected:
        return ops.reshape(x, (1,) + expected), True
    if x.shape[1:] != expected:
        raise ShapeError(f"Input {x.shape} does not match the declared input shape {expected}")
    return x, False


def run_graph(
    graph: NetworkGraph,
    x,
    params: Optional[ParameterSet] = None,
    ctx: Optional[ForwardContext] = None,
    until: Optional[int] = None,
) -> dict[int, Tensor]:
    """Forward pass in topological order; returns every computed activation by layer id

    With `until`, only the ancestors of that layer are computed.
    """
    ctx = ctx or ForwardContext()
    x, _ = _batched_input(graph, x)
    if params is None:
        params = parameter_tensors(graph, trainable=(), dtype=x.data.dtype)
    order = graph.order()
    if until is not None:
        needed = ancestors(graph.dependencies(), until)
        order = [lid for lid in order if lid in needed]
    by_id = {spec.id: spec for spec in graph.layers}
    activations: dict[int, Tensor] = {}
    for lid in order:
        spec = by_id[lid]
        inputs = [x] if spec.kind == LayerKind.INPUT else [activations[i] for i in spec.inputs]
        activations[lid] = get_layer(spec.kind).forward(spec, inputs, params.get(lid, {}), graph.buffers.get(lid, {}), ctx)
    return activations


def evaluate(graph: NetworkGraph, x, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Network output (softmax probabilities) for a batch or a single example"""
    single = not isinstance(x, Tensor) and np.asarray(x).shape == tuple(graph.meta.input_shape)
    out = run_graph(graph, x, ctx=ForwardContext(training=training, rng=rng))[graph.output_id]
    return ops.reshape(out, out.shape[1:]) if single else out


def logits(graph: NetworkGraph, x) -> np.ndarray:
    """Pre-softmax outputs, computed in inference mode"""
    return run_graph(graph, x, until=graph.logits_id)[graph.logits_id].data


def predict(graph: NetworkGraph, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Class probabilities in inference mode, batched to bound memory"""
    outputs = [evaluate(graph, x[start : start + batch_size]).data for start in range(0, len(x), batch_size)]
    return np.concatenate(outputs, axis=0) if outputs else np.zeros((0, graph.meta.n_classes), dtype=DTYPE)

