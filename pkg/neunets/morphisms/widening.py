from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.arch.layers import LayerKind, Shape
from neunets.morphisms.errors import InconsistentFanOutError, PreconditionError
from neunets.morphisms.placement import PASS_THROUGH_KINDS

logger = logging.getLogger(__name__)

WIDENABLE_KINDS = (LayerKind.CONVOLUTION, LayerKind.SEPARABLE_CONVOLUTION, LayerKind.FULLY_CONNECTED)


@dataclass
class ChannelChange:
    """New-to-old channel map: new channel j is a copy of old channel `replication[j]`

    The first `old_width` entries are the identity.
    """

    replication: list[int]

    @classmethod
    def sample(cls, old_width: int, new_width: int, rng: np.random.Generator) -> ChannelChange:
        extra = rng.integers(0, old_width, size=new_width - old_width)
        return cls(list(range(old_width)) + [int(i) for i in extra])

    def validate(self, old_width: int) -> None:
        if len(self.replication) < old_width:
            raise PreconditionError(f"Cannot shrink {old_width} channels to {len(self.replication)}")
        if list(self.replication[:old_width]) != list(range(old_width)):
            raise PreconditionError("The existing channels must keep their positions")
        if any(not 0 <= i < old_width for i in self.replication):
            raise PreconditionError(f"Replication map points outside the {old_width} existing channels")


def channel_group(graph: NetworkGraph, layer_id: int) -> set[int]:
    """Layers whose outputs share the channel axis of `layer_id`'s output

    Pass-through layers join their inputs and outputs; an Add joins all of its operands.
    """
    group = {layer_id}
    frontier = [layer_id]
    while frontier:
        current = frontier.pop()
        neighbours = [c for c in graph.consumers(current) if graph.layer(c).kind in PASS_THROUGH_KINDS]
        spec = graph.layer(current)
        if spec.kind in PASS_THROUGH_KINDS:
            neighbours.extend(spec.inputs)
        for neighbour in neighbours:
            if neighbour not in group:
                group.add(neighbour)
                frontier.append(neighbour)
    return group


def _replicate_outputs(result: NetworkGraph, original: NetworkGraph, member: int, idx: np.ndarray, origin: Optional[int]):
    spec = original.layer(member)
    if spec.kind in WIDENABLE_KINDS:
        if member == original.logits_id:
            raise InconsistentFanOutError(f"Layer {member} produces the network output and cannot be widened")
        weights = result.weights[member]
        name = "pointwise" if spec.kind == LayerKind.SEPARABLE_CONVOLUTION else "kernel"
        weights[name] = weights[name][..., idx]
        weights["bias"] = weights["bias"][idx]
        result.replace_layer(dataclasses.replace(result.layer(member), channels=len(idx)))
    elif spec.kind == LayerKind.BATCH_NORM:
        # BatchNorm statistics travel with their channel
        for group in (result.weights, result.buffers):
            group[member] = {name: array[idx] for name, array in group[member].items()}
    elif spec.kind in PASS_THROUGH_KINDS or member == origin:
        pass
    else:
        raise InconsistentFanOutError(f"Channels produced by {spec.kind.value} layer {member} cannot be replicated")


def _divide_inputs(result: NetworkGraph, original: NetworkGraph, consumer: int, idx: np.ndarray, counts: np.ndarray):
    spec = original.layer(consumer)
    weights = result.weights[consumer]
    share = counts[idx].astype(np.float64)
    if spec.kind == LayerKind.CONVOLUTION:
        weights["kernel"] = (weights["kernel"][:, :, idx, :] / share[None, None, :, None]).astype(np.float32)
    elif spec.kind == LayerKind.SEPARABLE_CONVOLUTION:
        weights["depthwise"] = weights["depthwise"][:, :, idx]
        weights["pointwise"] = (weights["pointwise"][:, :, idx, :] / share[None, None, :, None]).astype(np.float32)
    elif spec.kind == LayerKind.FULLY_CONNECTED:
        weights["kernel"] = (weights["kernel"][idx, :] / share[:, None]).astype(np.float32)
    else:
        raise InconsistentFanOutError(f"{spec.kind.value} layer {consumer} cannot absorb replicated channels")


def _widen_group(
    result: NetworkGraph,
    original: NetworkGraph,
    shapes: dict[int, Shape],
    group: set[int],
    idx: np.ndarray,
    counts: np.ndarray,
    origin: Optional[int],
    processed: set[int],
) -> None:
    for member in sorted(group):
        _replicate_outputs(result, original, member, idx, origin)
    for member in sorted(group):
        for consumer in original.consumers(member):
            # a weighted layer inside the group both reads and writes the replicated channels
            if consumer in processed or (consumer in group and original.layer(consumer).kind in PASS_THROUGH_KINDS):
                continue
            processed.add(consumer)
            if original.layer(consumer).kind != LayerKind.CONCAT:
                _divide_inputs(result, original, consumer, idx, counts)
                continue
            # the concatenated output is widened with the map shifted to this input's offset
            composite_idx, composite_counts, offset = [], [], 0
            for inp in original.layer(consumer).inputs:
                width = shapes[inp][-1]
                if inp in group:
                    composite_idx.append(offset + idx)
                    composite_counts.append(counts)
                else:
                    composite_idx.append(offset + np.arange(width))
                    composite_counts.append(np.ones(width, dtype=np.int64))
                offset += width
            _widen_group(
                result,
                original,
                shapes,
                channel_group(original, consumer),
                np.concatenate(composite_idx),
                np.concatenate(composite_counts),
                origin=consumer,
                processed=processed,
            )


def adapt_multi_io(graph: NetworkGraph, layer_id: int, change: ChannelChange) -> NetworkGraph:
    """Replicate the output channels of `layer_id` and adapt every affected producer and consumer

    Producers sharing the channel axis through Add merges are replicated identically, BatchNorm
    parameters follow their channels, and every consuming layer divides the weights of a
    replicated channel by its replication count.

    :raises InconsistentFanOutError: if the channel axis reaches a layer whose channels cannot be replicated
    """
    shapes = graph.shapes()
    old_width = shapes[layer_id][-1]
    change.validate(old_width)
    idx = np.asarray(change.replication, dtype=np.int64)
    counts = np.bincount(idx, minlength=old_width)
    result = graph.copy()
    group = channel_group(graph, layer_id)
    logger.debug(f"Widening layer {layer_id} from {old_width} to {len(idx)} channels, group {sorted(group)}")
    _widen_group(result, graph, shapes, group, idx, counts, origin=None, processed=set())
    result.validate()
    return result


def widen_layer(graph: NetworkGraph, layer_id: int, new_width: int, rng: np.random.Generator) -> NetworkGraph:
    """Grow a convolution, separable convolution or fully connected layer to `new_width` outputs

    Filters beyond the old width copy an existing filter chosen uniformly at random.
    """
    spec = graph.layer(layer_id)
    if spec.kind not in WIDENABLE_KINDS:
        raise PreconditionError(f"Cannot widen a {spec.kind.value} layer")
    if new_width <= spec.channels:
        raise PreconditionError(f"New width {new_width} must exceed the current {spec.channels}")
    return adapt_multi_io(graph, layer_id, ChannelChange.sample(spec.channels, new_width, rng))
