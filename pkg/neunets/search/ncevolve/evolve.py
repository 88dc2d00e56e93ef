from __future__ import annotations

import datetime
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.arch.template import NeuroCell, TemplateConfig, instantiate_template
from neunets.data.datasets import Dataset
from neunets.search.ncevolve.mutations import MutationKind, NoApplicableMutationError, mutate
from neunets.search.ncevolve.population import Individual, Population, tournament_select
from neunets.tensor.optim import OptimizerConfig
from neunets.training.events import EventLog, now
from neunets.training.ledger import BudgetLedger
from neunets.training.pool import TrainFn, run_parallel
from neunets.training.trainer import TrainJob, evaluate_fitness, train

logger = logging.getLogger(__name__)

CHILDREN_PER_GENERATION = 2


@dataclass
class EvolutionConfig:
    tournament_fraction: float = 0.25
    epochs_per_mutation: int = 3
    patience: int = 3
    max_generations: Optional[int] = None
    max_workers: int = 2
    initial_filters: int = 16
    template: TemplateConfig = field(default_factory=TemplateConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    final_epochs: int = 20
    final_patience: int = 3
    mutations: Optional[Sequence[MutationKind]] = None
    augment: bool = True
    retries: int = 20

    def __post_init__(self):
        if not 0 < self.tournament_fraction <= 1:
            raise ValueError(f"Tournament fraction must lie in (0, 1], got {self.tournament_fraction}")
        if self.max_generations is not None and self.max_generations < 0:
            raise ValueError(f"max_generations must be >= 0, got {self.max_generations}")


@dataclass
class EvolutionEvent:
    generation: int
    individual: int
    parent: int
    mutation: str
    fitness: float
    timestamp: datetime.datetime


@dataclass
class EvolutionResult:
    best: Individual
    population: Population
    generations: int
    # holdout accuracy of `best` after fine-tuning
    fitness: float


def seed_graph(data: Dataset, config: EvolutionConfig, seed: int) -> NetworkGraph:
    return instantiate_template(NeuroCell.initial(config.initial_filters), data.meta(), config.template, seed)


def seed_individual(
    data: Dataset,
    config: EvolutionConfig,
    seed: int,
    ledger: Optional[BudgetLedger] = None,
    train_fn: TrainFn = train,
) -> Individual:
    """The template with the initial cell, trained even when no budget is left"""
    job = TrainJob(
        seed_graph(data, config, seed),
        data,
        config.optimizer,
        epochs=config.epochs_per_mutation,
        patience=config.patience,
        seed=seed,
        augment=config.augment,
        job_id="ncevolve-0",
    )
    result = train_fn(job, None, None)
    if ledger is not None:
        ledger.charge(result.seconds)
    return Individual(id=0, graph=result.graph, fitness=result.holdout_accuracy, epochs=result.epochs_run)


def child_fitness(graph: NetworkGraph, data: Dataset, epochs_run: int, trained_fitness: float) -> float:
    # an untrained child computes its parent's function
    return trained_fitness if epochs_run else evaluate_fitness(graph, data.holdout)


def evolve(
    data: Dataset,
    config: Optional[EvolutionConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
    stop: Callable[[], bool] = lambda: False,
    events: Optional[EventLog] = None,
    on_generation: Optional[Callable[[Population, int], None]] = None,
    population: Optional[Population] = None,
    train_fn: TrainFn = train,
) -> EvolutionResult:
    """Evolve the neuro-cell from a single seed individual

    Every generation draws two parents by tournament (with replacement between the draws), mutates
    them and trains the children concurrently. The loop ends when the budget is spent, `stop()`
    returns true or `max_generations` is reached. The hall of fame is then fine-tuned.

    Passing `population` resumes an earlier run.
    """
    config = config or EvolutionConfig()
    rng = np.random.default_rng(seed)
    if population is None or not population.individuals:
        population = Population()
        population.add(seed_individual(data, config, seed, ledger, train_fn))
        logger.info(f"Seed individual fitness {population.individuals[0].fitness:.4f}")
    generation = max(ind.generation for ind in population.individuals)

    while True:
        if ledger is not None and ledger.exhausted:
            logger.info(f"Budget exhausted after generation {generation}")
            break
        if stop():
            logger.info(f"Stop requested after generation {generation}")
            break
        if config.max_generations is not None and generation >= config.max_generations:
            break
        generation += 1

        parents = [tournament_select(population, config.tournament_fraction, rng) for _ in range(CHILDREN_PER_GENERATION)]
        children = []
        for parent in parents:
            try:
                graph, record = mutate(parent.graph, rng, config.mutations, config.retries)
            except NoApplicableMutationError as e:
                logger.warning(f"Parent {parent.id} could not be mutated: {e}")
                graph, record = parent.graph, None
            children.append((parent, graph, record))

        first_id = population.next_id()
        jobs = [
            TrainJob(
                graph,
                data,
                config.optimizer,
                epochs=config.epochs_per_mutation,
                patience=config.patience,
                seed=int(rng.integers(2**31)),
                augment=config.augment,
                job_id=f"ncevolve-{first_id + i}",
            )
            for i, (_, graph, _) in enumerate(children)
        ]
        outcomes = run_parallel(jobs, config.max_workers, ledger, events, train_fn)

        for (parent, graph, record), outcome in zip(children, outcomes):
            if outcome.ok:
                result = outcome.result
                child_graph = result.graph
                fitness = child_fitness(child_graph, data, result.epochs_run, result.holdout_accuracy)
                epochs = result.epochs_run
            else:
                # failed children stay in the population so its size stays 1 + 2g
                child_graph, fitness, epochs = graph, 0.0, 0
            child = population.add(
                Individual(
                    id=population.next_id(),
                    graph=child_graph,
                    fitness=fitness,
                    parent=parent.id,
                    mutation=record,
                    epochs=epochs,
                    generation=generation,
                )
            )
            mutation_name = record.kind.value if record is not None else "none"
            logger.info(f"Generation {generation}: child {child.id} of {parent.id} ({mutation_name}) fitness {fitness:.4f}")
            if events is not None:
                events.append(EvolutionEvent(generation, child.id, parent.id, mutation_name, fitness, now()))

        if on_generation is not None:
            on_generation(population, generation)

    best = population.hall_of_fame
    fitness = best.fitness
    if config.final_epochs > 0 and not (ledger is not None and ledger.exhausted):
        started = time.perf_counter()
        job = TrainJob(
            best.graph,
            data,
            config.optimizer,
            epochs=config.final_epochs,
            patience=config.final_patience,
            seed=seed,
            augment=config.augment,
            job_id="ncevolve-final",
        )
        result = train_fn(job, ledger, events)
        if result.epochs_run and result.holdout_accuracy >= best.fitness:
            best = Individual(
                id=best.id,
                graph=result.graph,
                fitness=result.holdout_accuracy,
                parent=best.parent,
                mutation=best.mutation,
                epochs=best.epochs + result.epochs_run,
                generation=best.generation,
            )
            fitness = best.fitness
        logger.info(f"Fine-tuned individual {best.id} to {fitness:.4f} in {time.perf_counter() - started:.1f}s")
    return EvolutionResult(best=best, population=population, generations=generation, fitness=fitness)
