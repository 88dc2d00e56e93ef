from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

from neunets.arch.graph import NetworkGraph
from neunets.codec import from_dto, to_dto
from neunets.search.hyperband.groups import GroupStore, meta_features
from neunets.search.hyperband.run import HalvingState, HyperbandSettings, SuccessiveHalving, TrialRecord
from neunets.search.plugin import AbstractSynthesizer, Assessment, CandidateResult, Proposal, SynthesisContext
from neunets.search.tapas.dcn import compute_dcn
from neunets.search.tapas.lde import LifelongDatabase

logger = logging.getLogger(__name__)


@dataclass
class HyperbandState(HalvingState):
    group: Optional[int] = None


class HyperbandSynthesizer(AbstractSynthesizer):
    """Successive halving, one rung of one bracket per cycle

    With a group store the dataset joins the nearest group at initialization, the group's best
    configurations are trained to the maximum resource first and the winner is recorded when
    the search completes.
    """

    name = "hyperband"

    def __init__(self, settings: Optional[HyperbandSettings] = None):
        self.settings = settings or HyperbandSettings()
        self.saved = HyperbandState()
        self.graphs: dict[int, NetworkGraph] = {}
        self._pending: list[int] = []
        self.halving = SuccessiveHalving(self.settings, 0, self.saved)

    def _attach(self, context: SynthesisContext) -> None:
        self.context = context
        if context.epochs is not None:
            self.settings = dataclasses.replace(self.settings, max_resource=context.epochs)

    def _store(self) -> Optional[GroupStore]:
        if self.context.group_store_path is None:
            return None
        return GroupStore(self.context.group_store_path)

    def initialize(self, context: SynthesisContext) -> None:
        self._attach(context)
        self.saved = HyperbandState()
        store = self._store()
        if store is not None:
            dcn = compute_dcn(context.data, lde=LifelongDatabase(context.lde_path), seed=context.seed)
            group, _ = store.assign(context.dataset_id, meta_features(context.data, dcn), self.settings.group_radius)
            store.save()
            self.saved.group = group.id
            if context.warm_start and self.settings.warm_start:
                self.saved.warm = [scored.config for scored in group.best]
                logger.info(f"Warm start with {len(self.saved.warm)} configurations of group {group.id}")
        self.halving = SuccessiveHalving(self.settings, context.seed, self.saved)

    def propose(self, cycle: int) -> list[Proposal]:
        training = self.halving.next_rung()
        if training is None:
            self._pending = []
            return []
        self._pending = [t.id for t in training.trials]
        # the first network of the search is trained even on a spent budget
        untrained = not any(t.history for t in self.saved.trials)
        return [
            Proposal(
                label=f"trial {t.id}, bracket {t.bracket}, rung {training.rung}",
                graph=self._graph(t),
                optimizer=t.config.optimizer(),
                epochs=training.epochs - t.epochs,
                patience=training.epochs - t.epochs,
                seed=self.context.seed + t.id,
                augment=self.settings.augment,
                parent=t.candidate,
                guaranteed=untrained and i == 0,
            )
            for i, t in enumerate(training.trials)
        ]

    def _graph(self, trial: TrialRecord) -> NetworkGraph:
        if trial.id not in self.graphs:
            if trial.candidate is not None:
                self.graphs[trial.id] = self.context.load_model(trial.candidate)
            else:
                self.graphs[trial.id] = self.halving.initial_graph(trial, self.context.data.meta())
        return self.graphs[trial.id]

    def report(self, results: list[CandidateResult]) -> None:
        for trial_id, result in zip(self._pending, results):
            trial = self.saved.trials[trial_id]
            if self.halving.record(trial, result.fitness, result.epochs, failed=result.failed, candidate=result.candidate):
                self.graphs[trial.id] = result.graph
        self._pending = []
        self.halving.close_rung()

    def assess(self) -> Assessment:
        if self.halving.done:
            return Assessment.SATISFIED
        return Assessment.CONTINUE

    def finalize(self, best: CandidateResult) -> list[Proposal]:
        store = self._store()
        winner = next((t for t in self.saved.trials if best.candidate in t.history), None)
        if store is not None and winner is not None:
            group = next(g for g in store.groups if g.id == self.saved.group)
            group.record(winner.config, best.fitness)
            store.save()
            logger.info(f"Recorded trial {winner.id} ({best.fitness:.4f}) in group {group.id}")
        return []

    def state(self) -> dict:
        return to_dto(self.saved)

    def restore(self, context: SynthesisContext, state: dict) -> None:
        self._attach(context)
        self.saved = from_dto(HyperbandState, state)
        self.graphs = {}
        self.halving = SuccessiveHalving(self.settings, context.seed, self.saved)
