import numpy as np

from neunets.training.ledger import BudgetLedger
from neunets.training.pool import run_parallel
from neunets.training.trainer import DivergenceError, TrainJob, TrainResult
from neunets.training.trainer__test import mlp, separable_data


def jobs(count):
    data = separable_data()
    return [TrainJob(mlp(seed=i), data, epochs=2, seed=i, job_id=f"job-{i}") for i in range(count)]


def test_parallel_equals_sequential():
    parallel = run_parallel(jobs(2), max_workers=2)
    sequential = run_parallel(jobs(2), max_workers=1)
    for a, b in zip(parallel, sequential):
        assert a.ok and b.ok
        assert a.result.curve == b.result.curve
        np.testing.assert_array_equal(a.result.graph.weights[1]["kernel"], b.result.graph.weights[1]["kernel"])


def test_ledger_sums_job_time():
    def fake_train(job, ledger, events):
        ledger.charge(1.5)
        return TrainResult(graph=job.graph, curve=[], seconds=1.5, best_epoch=0)

    ledger = BudgetLedger()
    outcomes = run_parallel(jobs(5), max_workers=2, ledger=ledger, train_fn=fake_train)
    assert all(outcome.ok for outcome in outcomes)
    assert [outcome.job.job_id for outcome in outcomes] == [f"job-{i}" for i in range(5)]
    assert ledger.consumed == 7.5


def test_failing_job_is_isolated():
    def flaky_train(job, ledger, events):
        if job.job_id == "job-1":
            raise DivergenceError(2)
        return TrainResult(graph=job.graph, curve=[], seconds=0.0, best_epoch=0)

    outcomes = run_parallel(jobs(3), max_workers=3, train_fn=flaky_train)
    assert [outcome.ok for outcome in outcomes] == [True, False, True]
    assert isinstance(outcomes[1].error, DivergenceError)
    assert outcomes[1].error.epoch == 2
