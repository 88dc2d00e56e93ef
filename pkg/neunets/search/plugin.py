"""The contract between the pipeline engine and a coarse-grained synthesizer

The engine owns training, budget and persistence. A synthesizer only proposes networks,
learns from their measured holdout accuracies and says when it is satisfied. Everything a
synthesizer needs to continue after a restart goes through `state()` / `restore()`, graphs
being referenced by candidate id.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from neunets.arch.graph import NetworkGraph
from neunets.data.budget import Budget
from neunets.data.datasets import Dataset
from neunets.errors import NeunetsError
from neunets.tensor.optim import OptimizerConfig
from neunets.training.trainer import TrainJob


class Assessment(enum.Enum):
    CONTINUE = "continue"
    SATISFIED = "satisfied"


@dataclass
class Proposal:
    label: str
    graph: NetworkGraph
    optimizer: OptimizerConfig
    epochs: int
    patience: int
    seed: int
    augment: bool = False
    # candidate id of the network this one derives from
    parent: Optional[int] = None
    # trained even when no budget is left, charged afterwards
    guaranteed: bool = False

    def job(self, data: Dataset, job_id: str) -> TrainJob:
        return TrainJob(
            self.graph,
            data,
            self.optimizer,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
            augment=self.augment,
            job_id=job_id,
        )


@dataclass
class CandidateResult:
    candidate: int
    proposal: Proposal
    graph: NetworkGraph
    fitness: float
    epochs: int
    failed: bool = False


@dataclass
class SynthesisContext:
    data: Dataset
    budget: Budget
    seed: int
    dataset_id: str
    load_model: Callable[[int], NetworkGraph]
    # overrides the synthesizer's own epochs per candidate
    epochs: Optional[int] = None
    max_workers: int = 2
    warm_start: bool = True
    lde_path: Optional[Path] = None
    group_store_path: Optional[Path] = None


class AbstractSynthesizer:
    name: str = ""

    def initialize(self, context: SynthesisContext) -> None:
        raise NotImplementedError(repr(self))

    def propose(self, cycle: int) -> list[Proposal]:
        """Networks to train in `cycle`; an empty list ends the search"""
        raise NotImplementedError(repr(self))

    def report(self, results: list[CandidateResult]) -> None:
        raise NotImplementedError(repr(self))

    def assess(self) -> Assessment:
        """Must not change the synthesizer's state"""
        raise NotImplementedError(repr(self))

    def finalize(self, best: CandidateResult) -> list[Proposal]:
        """Last networks to train once satisfied; adopted when they are not worse than `best`"""
        return []

    def state(self) -> dict:
        raise NotImplementedError(repr(self))

    def restore(self, context: SynthesisContext, state: dict) -> None:
        raise NotImplementedError(repr(self))


synthesizer_registry: dict[str, type[AbstractSynthesizer]] = {}


class UnknownSynthesizerError(NeunetsError):
    pass


def get_synthesizer(name: str) -> type[AbstractSynthesizer]:
    try:
        return synthesizer_registry[name]
    except KeyError:
        raise UnknownSynthesizerError(f"No synthesizer registered as {name!r}")
