from neunets.search.ncevolve.evolve import EvolutionConfig, EvolutionEvent, EvolutionResult, evolve, seed_individual
from neunets.search.ncevolve.mutations import (
    MutationKind,
    MutationRecord,
    NoApplicableMutationError,
    assign_locals,
    mutate,
    mutation_registry,
)
from neunets.search.ncevolve.population import Individual, Population, tournament_select
