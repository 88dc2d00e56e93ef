import pytest

from neunets.search.plugin import Assessment
from neunets.search.plugin__test import ModelShelf, deliver, same_networks, synthesis_context
from neunets.search.tapas.lde import DatasetCharacterization, LifelongDatabase, dataset_fingerprint
from neunets.search.tapas.plugin import TapasSynthesizer
from neunets.search.tapas.search import InsufficientExperienceError
from neunets.search.tapas.search__test import small_config, tap  # noqa: F401
from neunets.training.trainer__test import image_data


@pytest.fixture
def data():
    return image_data()


@pytest.fixture
def lde_path(tmp_path, data):
    path = tmp_path / "lde.jsonl"
    LifelongDatabase(path).characterize(DatasetCharacterization(dataset_fingerprint(data), 0.5, data.n_classes, data.n_examples))
    return path


@pytest.fixture
def shelf():
    return ModelShelf()


def started(tap, data, lde_path, shelf, **context):
    synthesizer = TapasSynthesizer(small_config(), tap=tap)
    synthesizer.initialize(synthesis_context(data, shelf, lde_path=lde_path, **context))
    return synthesizer


def test_best_prediction_is_trained_alone_first(tap, data, lde_path, shelf):
    synthesizer = started(tap, data, lde_path, shelf)
    (first,) = synthesizer.propose(1)
    assert first.guaranteed
    assert first.label.startswith("rank 0 ")
    assert synthesizer.saved.dcn == 0.5
    predictions = [c.predicted for c in synthesizer.saved.top]
    assert len(predictions) == small_config().top_m
    assert predictions == sorted(predictions, reverse=True)


def test_ranks_are_trained_in_order_until_satisfied(tap, data, lde_path, shelf):
    synthesizer = started(tap, data, lde_path, shelf, max_workers=2)
    candidate, cycle = 0, 1
    while synthesizer.assess() is Assessment.CONTINUE:
        proposals = synthesizer.propose(cycle)
        deliver(synthesizer, proposals, shelf, candidate, fitness=lambda i, p: 0.1 * i)
        candidate, cycle = candidate + len(proposals), cycle + 1
    assert cycle == 3
    assert synthesizer.saved.measured == [0.0, 0.1, 0.2]
    assert synthesizer.saved.candidates == [0, 1, 2]
    assert synthesizer.propose(cycle) == []


def test_restore_continues_with_the_next_rank(tap, data, lde_path, shelf):
    synthesizer = started(tap, data, lde_path, shelf)
    deliver(synthesizer, synthesizer.propose(1), shelf, 0)
    restored = TapasSynthesizer(small_config())
    restored.restore(synthesis_context(data, shelf, lde_path=lde_path), synthesizer.state())
    expected, actual = synthesizer.propose(2), restored.propose(2)
    assert [p.label for p in actual] == [p.label for p in expected]
    assert all(same_networks(e.graph, a.graph) for e, a in zip(expected, actual))


def test_epoch_override(tap, data, lde_path, shelf):
    (first,) = started(tap, data, lde_path, shelf, epochs=6).propose(1)
    assert first.epochs == 6


def test_insufficient_experience(data, lde_path, shelf):
    synthesizer = TapasSynthesizer(small_config())
    with pytest.raises(InsufficientExperienceError):
        synthesizer.initialize(synthesis_context(data, shelf, lde_path=lde_path))
