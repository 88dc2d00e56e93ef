import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from neunets.training.events import EventLog
from neunets.training.ledger import BudgetLedger
from neunets.training.trainer import TrainJob, TrainResult, train

logger = logging.getLogger(__name__)

TrainFn = Callable[[TrainJob, Optional[BudgetLedger], Optional[EventLog]], TrainResult]


@dataclass
class JobOutcome:
    job: TrainJob
    result: Optional[TrainResult] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_one(job: TrainJob, train_fn: TrainFn, ledger: Optional[BudgetLedger], events: Optional[EventLog]) -> JobOutcome:
    try:
        return JobOutcome(job, result=train_fn(job, ledger, events))
    except Exception as e:
        logger.exception(f"Training job {job.job_id} failed")
        return JobOutcome(job, error=e)


def run_parallel(
    jobs: Sequence[TrainJob],
    max_workers: int = 2,
    ledger: Optional[BudgetLedger] = None,
    events: Optional[EventLog] = None,
    train_fn: TrainFn = train,
) -> list[JobOutcome]:
    """Train jobs concurrently; outcomes come back in job order and a failing job only fails itself"""
    if max_workers < 1:
        raise ValueError(f"max_workers must be >= 1, got {max_workers}")
    if max_workers == 1 or len(jobs) <= 1:
        return [_run_one(job, train_fn, ledger, events) for job in jobs]
    with ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="neunets-train") as executor:
        futures = [executor.submit(_run_one, job, train_fn, ledger, events) for job in jobs]
        return [future.result() for future in futures]
