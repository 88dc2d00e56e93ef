from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from neunets.codec import from_dto, to_dto
from neunets.search.ncevolve.evolve import CHILDREN_PER_GENERATION, EvolutionConfig, seed_graph
from neunets.search.ncevolve.mutations import MutationRecord, NoApplicableMutationError, mutate
from neunets.search.ncevolve.population import Individual, Population, tournament_select
from neunets.search.plugin import AbstractSynthesizer, Assessment, CandidateResult, Proposal, SynthesisContext

logger = logging.getLogger(__name__)


@dataclass
class Member:
    candidate: int
    fitness: float
    parent: Optional[int] = None
    mutation: Optional[MutationRecord] = None
    epochs: int = 0
    generation: int = 0


@dataclass
class EvolutionState:
    generation: int = 0
    members: list[Member] = field(default_factory=list)


class NcevolveSynthesizer(AbstractSynthesizer):
    """Tournament evolution of the neuro-cell, one generation per cycle

    The first cycle trains the seed template; every later cycle proposes two mutated children.
    """

    name = "ncevolve"

    def __init__(self, config: Optional[EvolutionConfig] = None):
        self.config = config or EvolutionConfig()
        self.population = Population()
        # candidate id of every individual, by individual id
        self.candidates: list[int] = []
        self.generation = 0
        self._pending: list[tuple[Optional[Individual], Optional[MutationRecord]]] = []

    def initialize(self, context: SynthesisContext) -> None:
        self.context = context
        if context.epochs is not None:
            self.config = dataclasses.replace(self.config, epochs_per_mutation=context.epochs)

    def _proposal(self, label: str, graph, seed: int, parent: Optional[int] = None, guaranteed: bool = False) -> Proposal:
        return Proposal(
            label=label,
            graph=graph,
            optimizer=self.config.optimizer,
            epochs=self.config.epochs_per_mutation,
            patience=self.config.patience,
            seed=seed,
            augment=self.config.augment,
            parent=parent,
            guaranteed=guaranteed,
        )

    def propose(self, cycle: int) -> list[Proposal]:
        if not self.population.individuals:
            self._pending = [(None, None)]
            graph = seed_graph(self.context.data, self.config, self.context.seed)
            return [self._proposal("seed", graph, self.context.seed, guaranteed=True)]

        rng = np.random.default_rng([self.context.seed, cycle])
        self._pending = []
        proposals = []
        for _ in range(CHILDREN_PER_GENERATION):
            parent = tournament_select(self.population, self.config.tournament_fraction, rng)
            try:
                graph, record = mutate(parent.graph, rng, self.config.mutations, self.config.retries)
            except NoApplicableMutationError as e:
                logger.warning(f"Individual {parent.id} could not be mutated: {e}")
                graph, record = parent.graph, None
            self._pending.append((parent, record))
            label = record.kind.value if record is not None else "none"
            proposals.append(self._proposal(label, graph, int(rng.integers(2**31)), parent=self.candidates[parent.id]))
        return proposals

    def report(self, results: list[CandidateResult]) -> None:
        generation = self.generation + 1 if self.population.individuals else 0
        for (parent, record), result in zip(self._pending, results):
            individual = self.population.add(
                Individual(
                    id=self.population.next_id(),
                    graph=result.graph,
                    fitness=result.fitness,
                    parent=parent.id if parent is not None else None,
                    mutation=record,
                    epochs=result.epochs,
                    generation=generation,
                )
            )
            self.candidates.append(result.candidate)
            logger.info(f"Generation {generation}: individual {individual.id} fitness {individual.fitness:.4f}")
        self.generation = generation
        self._pending = []

    def assess(self) -> Assessment:
        limit = self.config.max_generations
        if self.population.individuals and limit is not None and self.generation >= limit:
            return Assessment.SATISFIED
        return Assessment.CONTINUE

    def finalize(self, best: CandidateResult) -> list[Proposal]:
        if self.config.final_epochs < 1:
            return []
        proposal = self._proposal("fine-tune", best.graph, self.context.seed, parent=best.candidate)
        return [dataclasses.replace(proposal, epochs=self.config.final_epochs, patience=self.config.final_patience)]

    def state(self) -> dict:
        members = [
            Member(self.candidates[ind.id], ind.fitness, ind.parent, ind.mutation, ind.epochs, ind.generation)
            for ind in self.population.individuals
        ]
        return to_dto(EvolutionState(self.generation, members))

    def restore(self, context: SynthesisContext, state: dict) -> None:
        self.initialize(context)
        saved: EvolutionState = from_dto(EvolutionState, state)
        self.population = Population()
        self.candidates = []
        for member in saved.members:
            self.population.add(
                Individual(
                    id=self.population.next_id(),
                    graph=context.load_model(member.candidate),
                    fitness=member.fitness,
                    parent=member.parent,
                    mutation=member.mutation,
                    epochs=member.epochs,
                    generation=member.generation,
                )
            )
            self.candidates.append(member.candidate)
        self.generation = saved.generation
