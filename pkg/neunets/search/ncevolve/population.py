from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from neunets.arch.graph import NetworkGraph
from neunets.search.ncevolve.mutations import MutationRecord


@dataclass
class Individual:
    id: int
    graph: NetworkGraph
    fitness: float
    parent: Optional[int] = None
    mutation: Optional[MutationRecord] = None
    epochs: int = 0
    generation: int = 0


@dataclass
class Population:
    """Append-only; the hall of fame is the fittest individual so far, lower ids winning ties"""

    individuals: list[Individual] = field(default_factory=list)
    best_fitness_history: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.individuals)

    def next_id(self) -> int:
        return len(self.individuals)

    def add(self, individual: Individual) -> Individual:
        if individual.id != self.next_id():
            raise ValueError(f"Individual {individual.id} added out of order, expected id {self.next_id()}")
        if not 0 <= individual.fitness <= 1:
            raise ValueError(f"Fitness {individual.fitness} outside [0, 1]")
        self.individuals.append(individual)
        self.best_fitness_history.append(self.hall_of_fame.fitness)
        return individual

    @property
    def hall_of_fame(self) -> Individual:
        if not self.individuals:
            raise ValueError("Empty population")
        return _fittest(self.individuals)


def _fittest(individuals: list[Individual]) -> Individual:
    return max(individuals, key=lambda ind: (ind.fitness, -ind.id))


def tournament_select(population: Population, k: float, rng: np.random.Generator) -> Individual:
    """Fittest member of a uniformly drawn subset of ceil(k * |P|) individuals, without replacement"""
    if not population.individuals:
        raise ValueError("Cannot select from an empty population")
    if not 0 < k <= 1:
        raise ValueError(f"Tournament fraction must lie in (0, 1], got {k}")
    size = max(1, math.ceil(k * len(population) - 1e-9))
    chosen = rng.choice(len(population), size=size, replace=False)
    return _fittest([population.individuals[i] for i in chosen])
