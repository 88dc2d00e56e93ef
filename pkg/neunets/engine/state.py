from __future__ import annotations

import datetime
import enum
from dataclasses import dataclass, field
from typing import Any, Optional

from neunets.engine.config import RunConfig
from neunets.errors import NeunetsError
from neunets.finegrained.phases import PhaseReport
from neunets.training.events import now


class Stage(enum.Enum):
    CREATED = "created"
    VALIDATED = "validated"
    SYNTHESIZING = "synthesizing"
    FINALIZING = "finalizing"
    COMPLETED = "completed"
    STOPPED = "stopped"
    FAILED = "failed"

    @property
    def terminal(self) -> bool:
        return not TRANSITIONS[self]


TRANSITIONS: dict[Stage, frozenset] = {
    Stage.CREATED: frozenset({Stage.VALIDATED, Stage.FAILED}),
    Stage.VALIDATED: frozenset({Stage.SYNTHESIZING, Stage.STOPPED, Stage.FAILED}),
    Stage.SYNTHESIZING: frozenset({Stage.FINALIZING, Stage.STOPPED, Stage.FAILED}),
    Stage.FINALIZING: frozenset({Stage.COMPLETED, Stage.FAILED}),
    Stage.COMPLETED: frozenset(),
    Stage.STOPPED: frozenset(),
    Stage.FAILED: frozenset(),
}


class IllegalTransitionError(NeunetsError):
    def __init__(self, current: Stage, target: Stage):
        super().__init__(f"A pipeline cannot go from {current.value} to {target.value}")
        self.current = current
        self.target = target


@dataclass
class CandidateRecord:
    id: int
    cycle: int
    label: str
    fitness: float
    epochs: int
    parent: Optional[int] = None
    failed: bool = False
    # trained by the finalization of a satisfied synthesizer
    final: bool = False


@dataclass
class CycleSummary:
    cycle: int
    candidates: list[int]
    best_fitness: float
    consumed_seconds: float
    timestamp: datetime.datetime


@dataclass
class PipelineState:
    """Everything needed to continue a pipeline after its process died"""

    id: str
    config: RunConfig
    stage: Stage = Stage.CREATED
    # completed synthesis cycles
    cycle: int = 0
    consumed_seconds: float = 0.0
    candidates: list[CandidateRecord] = field(default_factory=list)
    history: list[CycleSummary] = field(default_factory=list)
    best: Optional[int] = None
    # the synthesizer's own state, as its `state()` returned it
    synthesizer: Any = None
    stop_reason: Optional[str] = None
    failure: Optional[str] = None
    export_dir: Optional[str] = None
    finegrained: bool = False
    finegrain_reports: list[PhaseReport] = field(default_factory=list)
    # finalization candidates trained and committed
    finalized: bool = False
    created: datetime.datetime = field(default_factory=now)
    updated: datetime.datetime = field(default_factory=now)

    def transition(self, target: Stage) -> None:
        if target not in TRANSITIONS[self.stage]:
            raise IllegalTransitionError(self.stage, target)
        self.stage = target
        self.updated = now()

    @property
    def best_candidate(self) -> Optional[CandidateRecord]:
        return self.candidates[self.best] if self.best is not None else None

    @property
    def best_fitness(self) -> float:
        best = self.best_candidate
        return best.fitness if best is not None else 0.0

    def add_candidate(self, record: CandidateRecord) -> CandidateRecord:
        """Append a trained candidate; it becomes the best when it beats the current best

        Finalization candidates also win ties.
        """
        if record.id != len(self.candidates):
            raise ValueError(f"Candidate {record.id} added out of order, expected id {len(self.candidates)}")
        self.candidates.append(record)
        current = self.best_candidate
        if current is None or record.fitness > current.fitness:
            self.best = record.id
        elif record.final and not record.failed and record.fitness == current.fitness:
            self.best = record.id
        return record
