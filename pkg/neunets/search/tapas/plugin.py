from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from neunets.codec import from_dto, to_dto
from neunets.search.plugin import AbstractSynthesizer, Assessment, CandidateResult, Proposal, SynthesisContext
from neunets.search.tapas.dcn import compute_dcn
from neunets.search.tapas.lde import LifelongDatabase
from neunets.search.tapas.predictor import TapModel, train_tap
from neunets.search.tapas.search import InsufficientExperienceError, RankedCandidate, TapasConfig, rank_candidates
from neunets.search.tapas.space import decode_chain, sample_chain

logger = logging.getLogger(__name__)


@dataclass
class TapasState:
    dcn: float
    top: list[RankedCandidate]
    measured: list[float] = field(default_factory=list)
    candidates: list[int] = field(default_factory=list)


class TapasSynthesizer(AbstractSynthesizer):
    """Predicts the accuracy of sampled chains and trains the best predictions, best first

    Initialization characterizes the dataset and fits the predictor on the LDE records of
    similar datasets; after that every cycle trains the next `max_workers` ranks.
    """

    name = "tapas"

    def __init__(self, config: Optional[TapasConfig] = None, tap: Optional[TapModel] = None):
        self.config = config or TapasConfig()
        self.tap = tap
        self.saved: Optional[TapasState] = None

    def initialize(self, context: SynthesisContext) -> None:
        self._attach(context)
        lde = LifelongDatabase(context.lde_path)
        dcn = compute_dcn(context.data, self.config.probe, lde, context.seed)
        tap = self.tap
        if tap is None:
            records = lde.select(dcn, self.config.tau)
            if not records:
                raise InsufficientExperienceError(dcn, self.config.tau, len(lde))
            logger.info(f"Training the accuracy predictor on {len(records)} experiments near {dcn:.3f}")
            tap = train_tap(records, self.config.tap)
        rng = np.random.default_rng(context.seed)
        meta = context.data.meta()
        chains = [sample_chain(meta, rng, self.config.space) for _ in range(self.config.n_candidates)]
        ranking = rank_candidates(tap, chains, meta, dcn)
        logger.info(f"Best predicted accuracy {ranking[0].predicted:.4f} of {len(ranking)} candidates")
        self.saved = TapasState(dcn=dcn, top=ranking[: self.config.top_m])

    def _attach(self, context: SynthesisContext) -> None:
        self.context = context
        if context.epochs is not None:
            self.config = dataclasses.replace(self.config, epochs=context.epochs)

    def propose(self, cycle: int) -> list[Proposal]:
        first = len(self.saved.measured)
        # the best prediction is trained even on a spent budget
        last = first + 1 if first == 0 else min(first + self.context.max_workers, len(self.saved.top))
        meta = self.context.data.meta()
        proposals = []
        for rank in range(first, last):
            candidate = self.saved.top[rank]
            graph = decode_chain(
                candidate.chain, meta, rng=self.context.seed + candidate.index, embedding_dim=self.config.space.embedding_dim
            ).graph
            proposals.append(
                Proposal(
                    label=f"rank {rank} (candidate {candidate.index}, predicted {candidate.predicted:.4f})",
                    graph=graph,
                    optimizer=self.config.optimizer,
                    epochs=self.config.epochs,
                    patience=self.config.patience,
                    seed=self.context.seed + rank,
                    augment=self.config.augment,
                    guaranteed=rank == 0,
                )
            )
        return proposals

    def report(self, results: list[CandidateResult]) -> None:
        for result in results:
            rank = len(self.saved.measured)
            self.saved.measured.append(result.fitness)
            self.saved.candidates.append(result.candidate)
            logger.info(f"Rank {rank}: predicted {self.saved.top[rank].predicted:.4f}, measured {result.fitness:.4f}")

    def assess(self) -> Assessment:
        if len(self.saved.measured) >= len(self.saved.top):
            return Assessment.SATISFIED
        return Assessment.CONTINUE

    def state(self) -> dict:
        return to_dto(self.saved)

    def restore(self, context: SynthesisContext, state: dict) -> None:
        self._attach(context)
        self.saved = from_dto(TapasState, state)
