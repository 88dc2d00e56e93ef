"""The mutation catalogue of the cell evolution

Mutations inside the neuro-cell are applied to every cell instance at the same local position,
so all instances stay isomorphic. Only the dense head is mutated outside the cells.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind
from neunets.arch.template import CELL_INPUT, cells_isomorphic
from neunets.errors import NeunetsError
from neunets.morphisms import (
    MorphismError,
    SkipConvSpec,
    branch,
    deepen,
    insert_skip,
    widen_kernel,
    widen_layer,
)
from neunets.tensor.autograd import ShapeError

logger = logging.getLogger(__name__)

WIDENING_FACTOR = (1.2, 2.0)
INSERTED_KERNEL = (3, 3)
KERNEL_STEP = 2


class MutationKind(enum.Enum):
    INSERT_CONVOLUTION = "insert_convolution"
    BRANCH_AND_INSERT = "branch_and_insert"
    INSERT_SKIP = "insert_skip"
    ALTER_FILTERS = "alter_filters"
    ALTER_UNITS = "alter_units"
    ALTER_KERNEL = "alter_kernel"


class NoApplicableMutationError(NeunetsError):
    pass


@dataclass
class MutationRecord:
    kind: MutationKind
    # local cell position, or the layer id for mutations outside the cells
    target: int
    detail: str = ""


class InapplicableMutation(Exception):
    """Raised inside a mutation to ask for another draw"""


def _instance(graph: NetworkGraph, slot: int, local: int) -> int:
    for spec in graph.layers:
        if spec.cell == slot and spec.local == local:
            return spec.id
    raise InapplicableMutation(f"Cell {slot} has no layer {local}")


def _cell_input(graph: NetworkGraph, slot: int) -> int:
    members = {spec.id for spec in graph.cell_layers(slot)}
    external = {i for spec in graph.cell_layers(slot) for i in spec.inputs if i not in members}
    if len(external) != 1:
        raise InapplicableMutation(f"Cell {slot} reads {sorted(external)}")
    return external.pop()


def assign_locals(graph: NetworkGraph) -> NetworkGraph:
    """Give new cell layers the next free local ids, in creation order"""
    result = graph.copy()
    for slot in result.cell_slots():
        members = result.cell_layers(slot)
        fresh = sorted(spec.id for spec in members if spec.local is None)
        base = max((spec.local for spec in members if spec.local is not None), default=-1) + 1
        for offset, lid in enumerate(fresh):
            result.replace_layer(dataclasses.replace(result.layer(lid), local=base + offset))
    return result


def in_every_cell(graph: NetworkGraph, local: int, apply: Callable[[NetworkGraph, int, int], NetworkGraph]) -> NetworkGraph:
    """Apply `apply(graph, layer_id, slot)` at local position `local` of every cell instance"""
    result = graph
    for slot in graph.cell_slots():
        anchor = _cell_input(result, slot) if local == CELL_INPUT else _instance(result, slot, local)
        result = apply(result, anchor, slot)
    result = assign_locals(result)
    if not cells_isomorphic(result):
        raise InapplicableMutation("Cell instances diverged")
    return result


def _cell_locals(graph: NetworkGraph, kinds: Optional[Sequence[LayerKind]] = None) -> list[int]:
    slots = graph.cell_slots()
    if not slots:
        return []
    return sorted(spec.local for spec in graph.cell_layers(slots[0]) if kinds is None or spec.kind in kinds)


def _pick(rng: np.random.Generator, candidates: Sequence[int]) -> int:
    if not candidates:
        raise InapplicableMutation("No candidate position")
    return int(candidates[rng.integers(len(candidates))])


def insert_convolution(graph: NetworkGraph, rng: np.random.Generator) -> tuple[NetworkGraph, MutationRecord]:
    """Identity 3x3 convolution (separable at random) after a cell position"""
    local = _pick(rng, [CELL_INPUT] + _cell_locals(graph))
    separable = bool(rng.integers(2))
    result = in_every_cell(graph, local, lambda g, lid, slot: deepen(g, lid, INSERTED_KERNEL, separable, cell=slot))
    return result, MutationRecord(MutationKind.INSERT_CONVOLUTION, local, "separable" if separable else "convolution")


def branch_and_insert(graph: NetworkGraph, rng: np.random.Generator) -> tuple[NetworkGraph, MutationRecord]:
    """Split a convolution in two and deepen the first branch"""
    local = _pick(rng, _cell_locals(graph, (LayerKind.CONVOLUTION,)))
    separable = bool(rng.integers(2))

    def apply(g, lid, slot):
        return deepen(branch(g, lid, cell=slot), lid, INSERTED_KERNEL, separable, cell=slot)

    return in_every_cell(graph, local, apply), MutationRecord(MutationKind.BRANCH_AND_INSERT, local)


def insert_skip_connection(graph: NetworkGraph, rng: np.random.Generator) -> tuple[NetworkGraph, MutationRecord]:
    shapes = graph.shapes()
    slots = graph.cell_slots()
    candidates = [spec.local for spec in (graph.cell_layers(slots[0]) if slots else []) if len(shapes[spec.id]) == 3]
    local = _pick(rng, sorted(candidates))
    result = in_every_cell(graph, local, lambda g, lid, slot: insert_skip(g, lid, SkipConvSpec(INSERTED_KERNEL), cell=slot))
    return result, MutationRecord(MutationKind.INSERT_SKIP, local)


def _widened(width: int, factor: float) -> int:
    return max(math.ceil(width * factor - 1e-9), width + 1)


def alter_filters(graph: NetworkGraph, rng: np.random.Generator) -> tuple[NetworkGraph, MutationRecord]:
    local = _pick(rng, _cell_locals(graph, (LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION)))
    factor = float(rng.uniform(*WIDENING_FACTOR))

    def apply(g, lid, slot):
        return widen_layer(g, lid, _widened(g.layer(lid).channels, factor), rng)

    return in_every_cell(graph, local, apply), MutationRecord(MutationKind.ALTER_FILTERS, local, f"factor {factor:.3f}")


def alter_units(graph: NetworkGraph, rng: np.random.Generator) -> tuple[NetworkGraph, MutationRecord]:
    """Widen a hidden fully connected layer of the head"""
    candidates = [
        spec.id
        for spec in graph.layers
        if spec.kind == LayerKind.FULLY_CONNECTED and spec.cell is None and spec.id != graph.logits_id
    ]
    lid = _pick(rng, sorted(candidates))
    factor = float(rng.uniform(*WIDENING_FACTOR))
    result = widen_layer(graph, lid, _widened(graph.layer(lid).channels, factor), rng)
    return result, MutationRecord(MutationKind.ALTER_UNITS, lid, f"factor {factor:.3f}")


def alter_kernel(graph: NetworkGraph, rng: np.random.Generator) -> tuple[NetworkGraph, MutationRecord]:
    local = _pick(rng, _cell_locals(graph, (LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION)))

    def apply(g, lid, slot):
        k1, k2 = g.layer(lid).kernel
        return widen_kernel(g, lid, (k1 + KERNEL_STEP, k2 + KERNEL_STEP))

    return in_every_cell(graph, local, apply), MutationRecord(MutationKind.ALTER_KERNEL, local)


mutation_registry: dict[MutationKind, Callable[[NetworkGraph, np.random.Generator], tuple[NetworkGraph, MutationRecord]]] = {
    MutationKind.INSERT_CONVOLUTION: insert_convolution,
    MutationKind.BRANCH_AND_INSERT: branch_and_insert,
    MutationKind.INSERT_SKIP: insert_skip_connection,
    MutationKind.ALTER_FILTERS: alter_filters,
    MutationKind.ALTER_UNITS: alter_units,
    MutationKind.ALTER_KERNEL: alter_kernel,
}


def mutate(
    graph: NetworkGraph,
    rng: np.random.Generator,
    kinds: Optional[Sequence[MutationKind]] = None,
    retries: int = 20,
) -> tuple[NetworkGraph, MutationRecord]:
    """One uniformly drawn mutation; inapplicable draws are resampled up to `retries` times

    :raises NoApplicableMutationError: if no draw succeeds
    """
    kinds = list(kinds or mutation_registry)
    for attempt in range(retries):
        kind = kinds[rng.integers(len(kinds))]
        try:
            return mutation_registry[kind](graph, rng)
        except (InapplicableMutation, MorphismError, ShapeError) as e:
            logger.debug(f"Mutation {kind.value} inapplicable (attempt {attempt + 1}): {e}")
    raise NoApplicableMutationError(f"No applicable mutation among {[k.value for k in kinds]} after {retries} draws")
