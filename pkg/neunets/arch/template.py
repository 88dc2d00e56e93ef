from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph, build_graph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.arch.ordering import topological_order
from neunets.errors import NeunetsError
from neunets.tensor.autograd import ShapeError

CELL_INPUT = -1


class ConstructionError(NeunetsError):
    pass


@dataclass(frozen=True)
class NeuroCell:
    """Sub-DAG template in local ids; an input of CELL_INPUT reads whatever precedes the slot"""

    layers: tuple[LayerSpec, ...]
    output: int

    @classmethod
    def initial(cls, filters: int = 16) -> NeuroCell:
        conv = LayerSpec(id=0, kind=LayerKind.CONVOLUTION, inputs=(CELL_INPUT,), kernel=(3, 3), channels=filters, activation="relu")
        return cls(layers=(conv,), output=0)

    def validate(self) -> None:
        local_ids = {spec.id for spec in self.layers}
        if self.output not in local_ids:
            raise ConstructionError(f"Cell output {self.output} is not one of its layers")
        for spec in self.layers:
            if spec.kind in (LayerKind.INPUT, LayerKind.SOFTMAX):
                raise ConstructionError(f"A cell cannot contain a {spec.kind.value} layer")
            if any(i != CELL_INPUT and i not in local_ids for i in spec.inputs):
                raise ConstructionError(f"Cell layer {spec.id} reads outside the cell")
        topological_order({spec.id: [i for i in spec.inputs if i != CELL_INPUT] for spec in self.layers})


@dataclass
class TemplateConfig:
    slots: int = 3
    head_units: int = 32
    embedding_dim: int = 32


def pool_window(meta: GraphMeta) -> tuple[int, int]:
    # text feature maps have height 1
    return (1, 2) if meta.domain == "text" else (2, 2)


def instantiate_template(
    cell: NeuroCell,
    meta: GraphMeta,
    config: Optional[TemplateConfig] = None,
    rng: Union[int, np.random.Generator] = 0,
) -> NetworkGraph:
    """Input, `slots` cell instances each followed by pooling, global pooling and the head

    :raises ConstructionError: if pooling exhausts the spatial dimensions
    """
    config = config or TemplateConfig()
    cell.validate()
    layers = [LayerSpec(id=0, kind=LayerKind.INPUT, shape=tuple(meta.input_shape))]
    previous = 0
    if meta.domain == "text":
        layers.append(
            LayerSpec(id=1, kind=LayerKind.EMBEDDING, inputs=(0,), channels=config.embedding_dim, vocab=meta.vocab_size)
        )
        previous = 1
    window = pool_window(meta)
    local_order = topological_order({spec.id: [i for i in spec.inputs if i != CELL_INPUT] for spec in cell.layers})
    by_local = {spec.id: spec for spec in cell.layers}

    for slot in range(config.slots):
        mapping = {CELL_INPUT: previous}
        for local in local_order:
            spec = by_local[local]
            mapping[local] = len(layers)
            layers.append(
                dataclasses.replace(
                    spec, id=len(layers), inputs=tuple(mapping[i] for i in spec.inputs), cell=slot, local=local
                )
            )
        layers.append(LayerSpec(id=len(layers), kind=LayerKind.MAX_POOL, inputs=(mapping[cell.output],), kernel=window, stride=window))
        previous = len(layers) - 1

    gap = len(layers)
    layers.append(LayerSpec(id=gap, kind=LayerKind.GLOBAL_AVG_POOL, inputs=(previous,)))
    layers.append(LayerSpec(id=gap + 1, kind=LayerKind.FULLY_CONNECTED, inputs=(gap,), channels=config.head_units, activation="relu"))
    layers.append(LayerSpec(id=gap + 2, kind=LayerKind.FULLY_CONNECTED, inputs=(gap + 1,), channels=meta.n_classes))
    layers.append(LayerSpec(id=gap + 3, kind=LayerKind.SOFTMAX, inputs=(gap + 2,)))
    try:
        return build_graph(layers, meta, rng)
    except ShapeError as e:
        raise ConstructionError(f"Template does not fit input {meta.input_shape}: {e}") from e


def extract_cell(graph: NetworkGraph, slot: int) -> NeuroCell:
    """The cell of one slot, in local ids"""
    members = graph.cell_layers(slot)
    if not members:
        raise ConstructionError(f"No cell in slot {slot}")
    to_local = {spec.id: spec.local for spec in members}
    layers = tuple(
        sorted(
            (
                dataclasses.replace(
                    spec, id=spec.local, inputs=tuple(to_local.get(i, CELL_INPUT) for i in spec.inputs), cell=None, local=None
                )
                for spec in members
            ),
            key=lambda spec: spec.id,
        )
    )
    outputs = [spec.local for spec in members if any(c not in to_local for c in graph.consumers(spec.id))]
    if len(outputs) != 1:
        raise ConstructionError(f"Cell in slot {slot} has outputs {outputs}")
    return NeuroCell(layers=layers, output=outputs[0])


def cell_signature(cell: NeuroCell) -> tuple:
    """Cell structure without widths, which follow from each instance's input channels"""
    return (
        cell.output,
        tuple(
            (spec.id, spec.kind, spec.inputs, spec.kernel, spec.stride, spec.padding, spec.activation)
            for spec in cell.layers
        ),
    )


def cells_isomorphic(graph: NetworkGraph) -> bool:
    signatures = {cell_signature(extract_cell(graph, slot)) for slot in graph.cell_slots()}
    return len(signatures) <= 1
