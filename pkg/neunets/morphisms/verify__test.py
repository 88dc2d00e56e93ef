import dataclasses

import numpy as np
import pytest

from neunets.arch.graph import GraphMeta
from neunets.arch.template import NeuroCell, TemplateConfig, instantiate_template
from neunets.morphisms.errors import MetadataMismatchError
from neunets.morphisms.verify import random_inputs, verify_function_preserving


@pytest.fixture
def graph():
    meta = GraphMeta(input_shape=(8, 8, 3), n_classes=4)
    return instantiate_template(NeuroCell.initial(4), meta, TemplateConfig(slots=2, head_units=8), rng=0)


def test_identity(graph):
    report = verify_function_preserving(graph, graph.copy())
    assert report.max_deviation == 0.0
    assert report.passed and report.trials == 100


def test_perturbed_weight_fails(graph):
    changed = graph.copy()
    changed.weights[1]["kernel"][1, 1, 0, 0] += 0.1
    report = verify_function_preserving(graph, changed)
    assert not report.passed
    assert report.max_deviation > report.tolerance


def test_metadata_mismatch(graph):
    changed = graph.copy()
    changed.meta = dataclasses.replace(changed.meta, nonnegative_inputs=True)
    with pytest.raises(MetadataMismatchError):
        verify_function_preserving(graph, changed)


def test_inputs_cover_the_domain():
    rng = np.random.default_rng(0)
    assert random_inputs(GraphMeta((4, 4, 1), 2, nonnegative_inputs=True), 50, rng).min() >= 0
    assert random_inputs(GraphMeta((4, 4, 1), 2), 50, rng).min() < 0
    ids = random_inputs(GraphMeta((6,), 2, domain="text", vocab_size=5), 50, rng)
    assert ids.shape == (50, 6) and set(np.unique(ids)) <= set(range(5))
