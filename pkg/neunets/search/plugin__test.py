import numpy as np
import pytest

from neunets.data.budget import Budget, BudgetTier
from neunets.search import get_synthesizer, synthesizer_registry
from neunets.search.hyperband.plugin import HyperbandSynthesizer
from neunets.search.ncevolve.plugin import NcevolveSynthesizer
from neunets.search.plugin import CandidateResult, Proposal, SynthesisContext, UnknownSynthesizerError
from neunets.search.tapas.lde import dataset_fingerprint
from neunets.search.tapas.plugin import TapasSynthesizer
from neunets.tensor.optim import OptimizerConfig
from neunets.training.trainer__test import chain, image_data


class ModelShelf:
    """What the engine keeps of trained candidates: their weights, by candidate id"""

    def __init__(self):
        self.graphs = {}

    def load(self, candidate):
        return self.graphs[candidate].copy()


def synthesis_context(data=None, shelf=None, **overrides):
    data = data if data is not None else image_data()
    values = dict(
        data=data,
        budget=Budget(BudgetTier.LOW, 1000.0),
        seed=0,
        dataset_id=dataset_fingerprint(data),
        load_model=(shelf or ModelShelf()).load,
    )
    values.update(overrides)
    return SynthesisContext(**values)


def deliver(synthesizer, proposals, shelf, first_candidate, fitness=lambda i, proposal: 0.5):
    """Report proposals as trained, keeping their weights on the shelf"""
    results = []
    for i, proposal in enumerate(proposals):
        candidate = first_candidate + i
        shelf.graphs[candidate] = proposal.graph
        results.append(CandidateResult(candidate, proposal, proposal.graph, fitness(candidate, proposal), proposal.epochs))
    synthesizer.report(results)
    return results


def same_networks(first, second):
    if [spec for spec in first.layers] != [spec for spec in second.layers]:
        return False
    return all(
        np.array_equal(first.weights[lid][name], second.weights[lid][name])
        for lid in first.weights
        for name in first.weights[lid]
    )


def test_registry():
    assert set(synthesizer_registry) == {"ncevolve", "tapas", "hyperband"}
    assert get_synthesizer("ncevolve") is NcevolveSynthesizer
    assert get_synthesizer("tapas") is TapasSynthesizer
    assert get_synthesizer("hyperband") is HyperbandSynthesizer
    with pytest.raises(UnknownSynthesizerError):
        get_synthesizer("random")


def test_proposal_job():
    data = image_data()
    proposal = Proposal("a", chain(), OptimizerConfig(), epochs=3, patience=2, seed=7, augment=True)
    job = proposal.job(data, "candidate-4")
    assert job.job_id == "candidate-4"
    assert job.data is data
    assert (job.epochs, job.patience, job.seed, job.augment) == (3, 2, 7, True)
