"""Pipeline persistence under `<state dir>/pipelines/<id>/`

    snapshots/<cycle>.json   one snapshot per completed cycle, rewritten on stage changes
    models/<candidate>.nnsg  the weights of every trained candidate
    STOP                     stop request marker

Every file is written to a temporary sibling first and renamed into place, so a reader
only ever sees complete files.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Union

from neunets.arch.graph import NetworkGraph
from neunets.arch.serialization import ModelFormatError, deserialize, serialize
from neunets.codec import from_dto, to_dto
from neunets.engine.state import PipelineState
from neunets.errors import NeunetsError
from neunets.storage import atomic_write

logger = logging.getLogger(__name__)

SNAPSHOT_SUFFIX = ".json"


class UnknownPipelineError(NeunetsError):
    def __init__(self, pipeline_id: str):
        super().__init__(f"No pipeline {pipeline_id!r}")
        self.pipeline_id = pipeline_id


class SnapshotError(NeunetsError):
    pass


class PipelineStore:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def directory(self, pipeline_id: str) -> Path:
        return self.root / pipeline_id

    def exists(self, pipeline_id: str) -> bool:
        return (self.directory(pipeline_id) / "snapshots").is_dir()

    def pipelines(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "snapshots").is_dir())

    def generations(self, pipeline_id: str) -> list[int]:
        """Cycle numbers with a snapshot, ascending"""
        snapshots = self.directory(pipeline_id) / "snapshots"
        if not snapshots.is_dir():
            return []
        return sorted(int(p.stem) for p in snapshots.glob(f"*{SNAPSHOT_SUFFIX}") if p.stem.isdigit())

    def _snapshot_path(self, pipeline_id: str, cycle: int) -> Path:
        return self.directory(pipeline_id) / "snapshots" / f"{cycle:06d}{SNAPSHOT_SUFFIX}"

    def checkpoint(self, state: PipelineState) -> Path:
        path = self._snapshot_path(state.id, state.cycle)
        atomic_write(path, json.dumps(to_dto(state), sort_keys=True))
        logger.debug(f"Pipeline {state.id}: snapshot of cycle {state.cycle} ({state.stage.value})")
        return path

    def restore(self, pipeline_id: str) -> PipelineState:
        """The newest readable snapshot; unreadable ones are skipped with a warning

        :raises UnknownPipelineError: if the pipeline has no snapshot directory
        :raises SnapshotError: if no snapshot can be read
        """
        if not self.exists(pipeline_id):
            raise UnknownPipelineError(pipeline_id)
        for cycle in reversed(self.generations(pipeline_id)):
            path = self._snapshot_path(pipeline_id, cycle)
            try:
                return from_dto(PipelineState, json.loads(path.read_text(encoding="utf-8")))
            except (OSError, ValueError, KeyError, TypeError, AssertionError) as e:
                logger.warning(f"Snapshot {path} is unreadable ({e}), falling back to the previous one")
        raise SnapshotError(f"Pipeline {pipeline_id} has no readable snapshot")

    def _model_path(self, pipeline_id: str, candidate: int) -> Path:
        return self.directory(pipeline_id) / "models" / f"{candidate:06d}.nnsg"

    def save_model(self, pipeline_id: str, candidate: int, graph: NetworkGraph) -> Path:
        path = self._model_path(pipeline_id, candidate)
        atomic_write(path, serialize(graph))
        return path

    def load_model(self, pipeline_id: str, candidate: int) -> NetworkGraph:
        path = self._model_path(pipeline_id, candidate)
        try:
            return deserialize(path.read_bytes())
        except OSError as e:
            raise ModelFormatError(f"Cannot read candidate {candidate} of pipeline {pipeline_id}: {e}") from e

    def stop_marker(self, pipeline_id: str) -> Path:
        return self.directory(pipeline_id) / "STOP"

    def request_stop(self, pipeline_id: str) -> None:
        atomic_write(self.stop_marker(pipeline_id), "")

    def stop_requested(self, pipeline_id: str) -> bool:
        return self.stop_marker(pipeline_id).exists()
