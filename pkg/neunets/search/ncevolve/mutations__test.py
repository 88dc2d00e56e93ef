import numpy as np
import pytest

from neunets.arch.graph import GraphMeta
from neunets.arch.layers import LayerKind
from neunets.arch.template import NeuroCell, TemplateConfig, cells_isomorphic, instantiate_template
from neunets.morphisms import MorphismError, verify_function_preserving
from neunets.morphisms.properties__test import random_network
from neunets.search.ncevolve.mutations import (
    InapplicableMutation,
    MutationKind,
    NoApplicableMutationError,
    mutate,
    mutation_registry,
)
from neunets.tensor.autograd import ShapeError


def template_network(filters=10, slots=2):
    meta = GraphMeta(input_shape=(8, 8, 3), n_classes=3)
    return instantiate_template(NeuroCell.initial(filters), meta, TemplateConfig(slots=slots, head_units=8), 0)


def cell_convolutions(graph):
    return [spec for spec in graph.layers if spec.cell is not None and spec.kind == LayerKind.CONVOLUTION]


@pytest.mark.parametrize("kind", list(MutationKind))
def test_every_mutation_preserves_the_function(kind):
    applied = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        parent = random_network(seed)
        try:
            child, record = mutation_registry[kind](parent, rng)
        except (InapplicableMutation, MorphismError, ShapeError):
            continue
        applied += 1
        assert record.kind == kind
        report = verify_function_preserving(parent, child, trials=10, seed=seed)
        assert report.passed, f"{kind.value} on network {seed}: {report.max_deviation}"
        assert cells_isomorphic(child)
    assert applied >= 20


def test_mutation_sequences_keep_cells_isomorphic():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        original = graph = random_network(seed)
        for _ in range(6):
            graph, _ = mutate(graph, rng)
            assert cells_isomorphic(graph)
        assert verify_function_preserving(original, graph, trials=10, tol=1e-4).passed


def test_alter_kernel_grows_by_two():
    child, _ = mutation_registry[MutationKind.ALTER_KERNEL](template_network(), np.random.default_rng(0))
    assert [spec.kernel for spec in cell_convolutions(child)] == [(5, 5), (5, 5)]


def test_alter_filters_stays_in_the_factor_range():
    for seed in range(100):
        child, _ = mutation_registry[MutationKind.ALTER_FILTERS](template_network(filters=10), np.random.default_rng(seed))
        for spec in cell_convolutions(child):
            assert 12 <= spec.channels <= 20


def test_alter_units_only_touches_the_head():
    parent = template_network()
    child, record = mutation_registry[MutationKind.ALTER_UNITS](parent, np.random.default_rng(0))
    assert child.layer(record.target).cell is None
    assert child.layer(record.target).channels > parent.layer(record.target).channels
    assert [s.channels for s in cell_convolutions(child)] == [s.channels for s in cell_convolutions(parent)]


def test_insert_convolution_adds_a_layer_to_every_cell():
    parent = template_network(slots=3)
    child, _ = mutate(parent, np.random.default_rng(0), [MutationKind.INSERT_CONVOLUTION])
    for slot in parent.cell_slots():
        assert len(child.cell_layers(slot)) == len(parent.cell_layers(slot)) + 1
        assert sorted(spec.local for spec in child.cell_layers(slot)) == [0, 1]


def test_exhausted_retries():
    # a one-filter convolution cannot be branched
    with pytest.raises(NoApplicableMutationError):
        mutate(template_network(filters=1), np.random.default_rng(0), [MutationKind.BRANCH_AND_INSERT], retries=3)
