"""Binary model format

    b"NNSG" | u16 version | u32 length | canonical JSON structure | tensor blobs

Every blob is a u32 byte length followed by little-endian float32 values. Blobs follow the
order of the `tensors` list of the JSON structure, which is sorted by layer id. All
integers are little-endian.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph
from neunets.arch.layers import LayerSpec
from neunets.codec import from_dto, to_dto
from neunets.errors import NeunetsError

MAGIC = b"NNSG"
VERSION = 1


class ModelFormatError(NeunetsError):
    pass


@dataclass
class TensorEntry:
    layer: int
    group: str  # "weights" or "buffers"
    name: str
    shape: tuple[int, ...]


@dataclass
class GraphStructure:
    meta: GraphMeta
    layers: list[LayerSpec]
    tensors: list[TensorEntry]


def _entries(graph: NetworkGraph) -> list[TensorEntry]:
    entries = []
    for group in ("weights", "buffers"):
        for layer_id, tensors in getattr(graph, group).items():
            entries.extend(TensorEntry(layer_id, group, name, tuple(array.shape)) for name, array in tensors.items())
    return sorted(entries, key=lambda e: (e.layer, e.group, e.name))


def canonical_json(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")


def serialize(graph: NetworkGraph) -> bytes:
    entries = _entries(graph)
    structure = GraphStructure(meta=graph.meta, layers=sorted(graph.layers, key=lambda s: s.id), tensors=entries)
    header = canonical_json(to_dto(structure))
    chunks = [MAGIC, struct.pack("<HI", VERSION, len(header)), header]
    for entry in entries:
        blob = np.ascontiguousarray(getattr(graph, entry.group)[entry.layer][entry.name], dtype="<f4").tobytes()
        chunks.append(struct.pack("<I", len(blob)))
        chunks.append(blob)
    return b"".join(chunks)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise ModelFormatError(f"Truncated model: need {size} bytes at offset {self.offset}")
        chunk = self.payload[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize(payload: bytes) -> NetworkGraph:
    """
    :raises ModelFormatError: on a foreign magic, an unknown version or a corrupt payload
    """
    reader = _Reader(payload)
    if reader.take(4) != MAGIC:
        raise ModelFormatError("Not a model file (bad magic)")
    version, header_length = reader.unpack("<HI")
    if version != VERSION:
        raise ModelFormatError(f"Unsupported model format version {version}")
    try:
        structure: GraphStructure = from_dto(GraphStructure, json.loads(reader.take(header_length).decode("utf-8")))
    except (ValueError, KeyError, TypeError) as e:
        raise ModelFormatError(f"Corrupt model structure: {e}") from e

    graph = NetworkGraph(layers=list(structure.layers), meta=structure.meta)
    for entry in structure.tensors:
        (length,) = reader.unpack("<I")
        expected = 4 * int(np.prod(entry.shape, dtype=np.int64))
        if length != expected:
            raise ModelFormatError(f"Blob of layer {entry.layer}/{entry.name} has {length} bytes, expected {expected}")
        array = np.frombuffer(reader.take(length), dtype="<f4").astype(np.float32).reshape(entry.shape)
        getattr(graph, entry.group).setdefault(entry.layer, {})[entry.name] = array
    if reader.offset != len(payload):
        raise ModelFormatError(f"{len(payload) - reader.offset} trailing bytes after the last tensor")
    return graph


def save_model(graph: NetworkGraph, path) -> None:
    with open(path, "wb") as f:
        f.write(serialize(graph))


def load_model(path) -> NetworkGraph:
    with open(path, "rb") as f:
        return deserialize(f.read())
