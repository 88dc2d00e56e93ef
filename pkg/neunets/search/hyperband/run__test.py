import threading

import pytest

from neunets.search.hyperband.groups import GroupStore
from neunets.search.hyperband.run import HyperbandSettings, promote, run_hyperband, search_with_groups
from neunets.search.hyperband.schedule import build_schedule
from neunets.search.hyperband.space import HyperbandSpace, Representation, sample_config
from neunets.search.tapas.lde import DatasetCharacterization, LifelongDatabase, dataset_fingerprint
from neunets.training.events import EventLog
from neunets.training.ledger import BudgetLedger
from neunets.training.trainer import EpochRecord, TrainResult
from neunets.training.trainer__test import image_data

SPACE = HyperbandSpace(components=(1, 2), stacks=(1, 2), channels=(2, 4), level2_motifs=2, branch_nodes=2)


def quality(graph):
    """Deterministic stand-in accuracy of a network"""
    return (graph.param_count() * 7919 % 1000) / 1000


class StubTrainer:
    def __init__(self, seconds_per_epoch=0.0):
        self.seconds_per_epoch = seconds_per_epoch
        self.calls = []
        self.lock = threading.Lock()

    def __call__(self, job, ledger, events):
        epochs = job.epochs
        with self.lock:
            self.calls.append((job.job_id, job.epochs))
            if ledger is not None and self.seconds_per_epoch:
                epochs = min(epochs, int(ledger.remaining // self.seconds_per_epoch))
                ledger.charge(epochs * self.seconds_per_epoch)
        accuracy = self.accuracy(job)
        curve = [EpochRecord(e, 1.0, 0.5, accuracy) for e in range(1, epochs + 1)]
        return TrainResult(job.graph, curve, seconds=epochs * self.seconds_per_epoch, best_epoch=epochs)

    def accuracy(self, job):
        return quality(job.graph)


def settings(**overrides):
    values = dict(max_resource=9, eta=3, space=SPACE, max_workers=2)
    values.update(overrides)
    return HyperbandSettings(**values)


def test_promote_keeps_the_top_with_lower_ids_on_ties():
    class T:
        def __init__(self, id, accuracy):
            self.id, self.accuracy = id, accuracy

    trials = [T(0, 0.5), T(1, 0.9), T(2, 0.5), T(3, 0.7)]
    assert [t.id for t in promote(trials, 3)] == [1, 3, 0]


def test_winner_is_the_best_sampled_configuration():
    trainer = StubTrainer()
    result = run_hyperband(image_data(), settings(), train_fn=trainer)
    schedule = build_schedule(9, 3)
    assert len(result.trials) == sum(bracket.n for bracket in schedule.brackets)
    assert not result.partial
    assert result.brackets_run == len(schedule.brackets)
    expected = max(result.trials, key=lambda t: (quality(t.graph), -t.id))
    assert result.best.id == expected.id
    assert result.best.accuracy == quality(expected.graph)


def test_rung_survivors(tmp_path):
    events = EventLog(tmp_path / "events.jsonl")
    run_hyperband(image_data(), settings(), events=events, train_fn=StubTrainer())
    lines = [line for line in events.read() if "promoted" in line]
    schedule = build_schedule(9, 3)
    for bracket in schedule.brackets:
        for i, rung in enumerate(bracket.rungs[:-1]):
            rung_lines = [line for line in lines if line["bracket"] == bracket.s and line["rung"] == i]
            assert len(rung_lines) == rung.n
            promoted = sorted(rung_lines, key=lambda line: (-line["accuracy"], line["trial"]))[: bracket.rungs[i + 1].n]
            assert {line["trial"] for line in rung_lines if line["promoted"]} == {line["trial"] for line in promoted}


def test_survivors_resume_instead_of_restarting():
    trainer = StubTrainer()
    result = run_hyperband(image_data(), settings(), train_fn=trainer)
    # the first bracket trains for 1, 3 and 9 epochs in total; promotions add the difference
    first_bracket = [t for t in result.trials if t.bracket == 2]
    assert max(t.epochs for t in first_bracket) == 9
    per_trial = {}
    for job_id, epochs in trainer.calls:
        per_trial.setdefault(job_id, []).append(epochs)
    assert [1, 2, 6] in per_trial.values()


def test_budget_is_never_exceeded():
    ledger = BudgetLedger(cap_seconds=20)
    result = run_hyperband(image_data(), settings(), ledger=ledger, train_fn=StubTrainer(seconds_per_epoch=1.0))
    assert ledger.consumed <= 20
    assert result.partial
    assert result.best.rung >= 0


def test_stop_request():
    result = run_hyperband(image_data(), settings(), stop=lambda: True, train_fn=StubTrainer())
    assert result.partial
    assert result.best is None
    assert result.trials == []
    assert result.brackets_run == 0


def test_spent_budget_yields_an_empty_partial_result(tmp_path):
    trainer = StubTrainer(seconds_per_epoch=1.0)
    store = GroupStore(tmp_path / "groups.json")
    grouped = search_with_groups(
        image_data(), store, "d", dcn=0.5, settings=settings(), ledger=BudgetLedger(cap_seconds=0), train_fn=trainer
    )
    assert grouped.result.partial
    assert grouped.result.best is None
    assert trainer.calls == []
    assert GroupStore(tmp_path / "groups.json").groups[0].best == []


def test_single_representation():
    result = run_hyperband(image_data(), settings(representations=(Representation.HIERARCHY,)), train_fn=StubTrainer())
    assert {t.config.representation for t in result.trials} == {Representation.HIERARCHY}


def test_real_training():
    result = run_hyperband(image_data(), settings(max_resource=3, max_workers=1), seed=1)
    assert 0 <= result.best.accuracy <= 1
    result.best.graph.validate()
    assert result.best.epochs >= 1


def test_warm_start_reuses_the_group_best(tmp_path):
    data = image_data()
    store = GroupStore(tmp_path / "groups.json")
    first = search_with_groups(data, store, "d", dcn=0.5, settings=settings(), train_fn=StubTrainer(), seed=0)
    assert first.new_group and first.warm_configs == 0

    store = GroupStore(tmp_path / "groups.json")
    trainer = StubTrainer()
    second = search_with_groups(data, store, "d", dcn=0.5, settings=settings(), train_fn=trainer, seed=1)
    assert not second.new_group
    assert second.warm_configs == 1
    assert second.result.trials[0].config == first.result.best.config
    seeded_quality = quality(second.result.trials[0].graph)
    assert second.result.best.accuracy >= seeded_quality


def test_warm_start_can_be_disabled(tmp_path):
    data = image_data()
    store = GroupStore(tmp_path / "groups.json")
    search_with_groups(data, store, "d", dcn=0.5, settings=settings(), train_fn=StubTrainer())
    second = search_with_groups(data, store, "d", dcn=0.5, settings=settings(warm_start=False), train_fn=StubTrainer())
    assert second.warm_configs == 0


def test_settings_validation():
    with pytest.raises(ValueError):
        HyperbandSettings(representations=())


class SeededTrainer(StubTrainer):
    """Trial 0 looks poor on short rungs and wins at the full resource of 9 epochs; the rest score 0.5"""

    def accuracy(self, job):
        if job.job_id != "hyperband-0":
            return 0.5
        return 0.99 if job.epochs >= 9 else 0.1


def test_seeded_configurations_are_trained_to_the_maximum_resource():
    seeded = sample_config(SPACE, Representation.PLAIN_CHAIN, 7)
    trainer = SeededTrainer()
    result = run_hyperband(image_data(), settings(), warm_configs=[seeded], train_fn=trainer)
    assert result.trials[0].config == seeded
    assert ("hyperband-0", 9) in trainer.calls
    assert result.best.id == 0
    assert result.best.epochs == 9
    assert result.best.accuracy == 0.99
    assert len(result.trials) == 1 + sum(bracket.n for bracket in build_schedule(9, 3).brackets)
    assert result.brackets_run == 1 + len(build_schedule(9, 3).brackets)


def test_characterization_number_is_read_from_the_lde(tmp_path):
    data = image_data()
    lde = LifelongDatabase(tmp_path / "lde.jsonl")
    lde.characterize(DatasetCharacterization(dataset_fingerprint(data), 0.3, data.n_classes, data.n_examples))
    store = GroupStore(tmp_path / "groups.json")
    search_with_groups(data, store, "d", settings=settings(), train_fn=StubTrainer(), lde=lde)
    assert GroupStore(tmp_path / "groups.json").groups[0].member_features[0][-1] == 0.3
