from __future__ import annotations

import dataclasses
import datetime
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph
from neunets.data.datasets import Dataset
from neunets.search.hyperband.groups import GroupStore, meta_features
from neunets.search.hyperband.schedule import Bracket, Rung, build_schedule
from neunets.search.hyperband.space import HyperbandConfig, HyperbandSpace, Representation, decode_config, sample_config
from neunets.search.tapas.dcn import compute_dcn
from neunets.search.tapas.lde import LifelongDatabase
from neunets.training.events import EventLog, now
from neunets.training.ledger import BudgetLedger
from neunets.training.pool import TrainFn, run_parallel
from neunets.training.trainer import TrainJob, train

logger = logging.getLogger(__name__)


@dataclass
class HyperbandSettings:
    max_resource: int = 27
    eta: int = 3
    representations: tuple[Representation, ...] = tuple(Representation)
    space: HyperbandSpace = field(default_factory=HyperbandSpace)
    max_workers: int = 2
    augment: bool = False
    warm_start: bool = True
    group_radius: float = 1.0

    def __post_init__(self):
        if not self.representations:
            raise ValueError("At least one representation is needed")


@dataclass
class TrialRecord:
    id: int
    config: HyperbandConfig
    bracket: int
    accuracy: float = 0.0
    # epochs trained so far, across rungs
    epochs: int = 0
    rung: int = -1
    failed: bool = False
    # candidate holding the latest weights
    candidate: Optional[int] = None
    # every candidate trained for this trial
    history: list[int] = field(default_factory=list)


@dataclass
class Trial(TrialRecord):
    graph: Optional[NetworkGraph] = None


@dataclass
class HalvingState:
    # position in the schedule
    bracket: int = 0
    rung: int = 0
    survivors: list[int] = field(default_factory=list)
    trials: list[TrialRecord] = field(default_factory=list)
    # seeded configurations, trained to the maximum resource before any sampled bracket
    warm: list[HyperbandConfig] = field(default_factory=list)


@dataclass
class RungTraining:
    bracket: Bracket
    rung: int
    # resource of the rung, survivors train up to it
    epochs: int
    trials: list[TrialRecord]


@dataclass
class RungEvent:
    bracket: int
    rung: int
    trial: int
    epochs: int
    accuracy: float
    promoted: bool
    timestamp: datetime.datetime


def promote(trials: Sequence[TrialRecord], keep: int) -> list[TrialRecord]:
    """The `keep` most accurate trials; equal accuracies favour the lower id"""
    return sorted(trials, key=lambda t: (-t.accuracy, t.id))[:keep]


class SuccessiveHalving:
    """Position in a hyperband schedule, advanced one rung at a time

    Seeded configurations form a bracket of their own with a single rung at the maximum
    resource, ahead of the sampled brackets. The caller trains what `next_rung` returns, books
    every outcome with `record` and calls `close_rung`. All progress lives in `state`.
    """

    def __init__(self, settings: HyperbandSettings, seed: int, state: Optional[HalvingState] = None):
        self.settings = settings
        self.seed = seed
        self.state = state if state is not None else HalvingState()
        schedule = build_schedule(settings.max_resource, settings.eta)
        warm = [Bracket(s=0, rungs=[Rung(n=len(self.state.warm), r=float(settings.max_resource))])]
        self.brackets: list[Bracket] = (warm if self.state.warm else []) + schedule.brackets

    @property
    def done(self) -> bool:
        return self.state.bracket >= len(self.brackets)

    @property
    def brackets_started(self) -> int:
        return self.state.bracket + (1 if self.state.survivors else 0)

    def survivors(self) -> list[TrialRecord]:
        return [self.state.trials[t] for t in self.state.survivors]

    def next_rung(self) -> Optional[RungTraining]:
        """The next rung with trials to train, opening brackets as needed; None once the schedule is done"""
        while not self.done:
            if not self.state.survivors:
                self._open_bracket()
            bracket = self.brackets[self.state.bracket]
            epochs = bracket.rungs[self.state.rung].epochs
            pending = [t for t in self.survivors() if t.epochs < epochs and not t.failed]
            if pending:
                return RungTraining(bracket, self.state.rung, epochs, pending)
            self.close_rung()
        return None

    def _open_bracket(self) -> None:
        b = self.state.bracket
        bracket = self.brackets[b]
        if self.state.warm and b == 0:
            configs = list(self.state.warm)
            logger.info(f"Seeded bracket: {len(configs)} configurations at {bracket.rungs[0].epochs} epochs")
        else:
            rng = np.random.default_rng([self.seed, b])
            representations = self.settings.representations
            configs = [
                sample_config(self.settings.space, representations[int(rng.integers(len(representations)))], rng)
                for _ in range(bracket.n)
            ]
            logger.info(f"Bracket s={bracket.s}: {bracket.n} configurations, {len(bracket.rungs)} rungs")
        for config in configs:
            trial = TrialRecord(id=len(self.state.trials), config=config, bracket=bracket.s)
            self.state.trials.append(trial)
            self.state.survivors.append(trial.id)

    def initial_graph(self, trial: TrialRecord, meta: GraphMeta) -> NetworkGraph:
        rng = np.random.default_rng([self.seed, trial.id])
        return decode_config(trial.config, meta, rng, self.settings.space.embedding_dim)

    def record(
        self, trial: TrialRecord, accuracy: float, epochs: int, failed: bool = False, candidate: Optional[int] = None
    ) -> bool:
        """Books a training outcome in the current rung; returns whether new weights were trained"""
        if failed:
            trial.failed, trial.accuracy, trial.rung = True, 0.0, self.state.rung
            return False
        if not epochs:
            # stopped by the budget before its first epoch
            return False
        trial.rung = self.state.rung
        trial.epochs += epochs
        trial.accuracy = accuracy
        if candidate is not None:
            trial.candidate = candidate
            trial.history.append(candidate)
        return True

    def close_rung(self) -> list[tuple[TrialRecord, bool]]:
        """Promotes the best survivors; returns every survivor of the closed rung and whether it was promoted"""
        bracket = self.brackets[self.state.bracket]
        rung = self.state.rung
        keep = bracket.rungs[rung + 1].n if rung + 1 < len(bracket.rungs) else 1
        survivors = self.survivors()
        promoted = promote(survivors, keep)
        promoted_ids = {t.id for t in promoted}
        self.state.survivors = [t.id for t in promoted]
        self.state.rung += 1
        if self.state.rung == len(bracket.rungs):
            self.state.bracket += 1
            self.state.rung = 0
            self.state.survivors = []
        return [(t, t.id in promoted_ids) for t in survivors]

    def best(self) -> Optional[TrialRecord]:
        """The most accurate trial that finished a rung, None before any did"""
        measured = [t for t in self.state.trials if t.rung >= 0 and not t.failed]
        return promote(measured, 1)[0] if measured else None


@dataclass
class HyperbandResult:
    # None when the search was halted before any trial trained
    best: Optional[Trial]
    trials: list[Trial]
    # set when the budget or a stop request cut the schedule short
    partial: bool
    brackets_run: int


def run_hyperband(
    data: Dataset,
    settings: Optional[HyperbandSettings] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
    stop: Callable[[], bool] = lambda: False,
    events: Optional[EventLog] = None,
    warm_configs: Sequence[HyperbandConfig] = (),
    train_fn: TrainFn = train,
) -> HyperbandResult:
    """Successive halving over every bracket, most exploratory first

    Survivors resume from the weights of their previous rung and train up to the rung's
    resource. `warm_configs` are trained to the maximum resource first.
    """
    settings = settings or HyperbandSettings()
    halving = SuccessiveHalving(settings, seed, HalvingState(warm=list(warm_configs)))
    meta = data.meta()
    graphs: dict[int, NetworkGraph] = {}
    partial = False

    def graph_of(trial: TrialRecord) -> NetworkGraph:
        if trial.id not in graphs:
            graphs[trial.id] = halving.initial_graph(trial, meta)
        return graphs[trial.id]

    def halted() -> bool:
        if ledger is not None and ledger.exhausted:
            logger.info(f"Budget exhausted, {len(halving.state.trials)} configurations sampled")
            return True
        if stop():
            logger.info("Stop requested")
            return True
        return False

    while not halving.done:
        if halted():
            partial = True
            break
        training = halving.next_rung()
        if training is None:
            break
        jobs = [
            TrainJob(
                graph_of(t),
                data,
                t.config.optimizer(),
                epochs=training.epochs - t.epochs,
                patience=training.epochs - t.epochs,
                seed=seed + t.id,
                augment=settings.augment,
                job_id=f"hyperband-{t.id}",
            )
            for t in training.trials
        ]
        for trial, outcome in zip(training.trials, run_parallel(jobs, settings.max_workers, ledger, events, train_fn)):
            if not outcome.ok:
                halving.record(trial, 0.0, 0, failed=True)
            elif halving.record(trial, outcome.result.holdout_accuracy, outcome.result.epochs_run):
                graphs[trial.id] = outcome.result.graph
        for trial, promoted in halving.close_rung():
            if events is not None:
                events.append(
                    RungEvent(training.bracket.s, training.rung, trial.id, trial.epochs, trial.accuracy, promoted, now())
                )

    trials = [
        Trial(**{f.name: getattr(record, f.name) for f in dataclasses.fields(TrialRecord)}, graph=graphs.get(record.id))
        for record in halving.state.trials
    ]
    best_record = halving.best()
    best = trials[best_record.id] if best_record is not None else None
    if best is None:
        logger.warning(f"No configuration finished a rung ({len(trials)} sampled)")
    else:
        logger.info(f"Best configuration {best.id} ({best.config.representation.value}) accuracy {best.accuracy:.4f}")
    return HyperbandResult(best=best, trials=trials, partial=partial, brackets_run=halving.brackets_started)


@dataclass
class GroupedResult:
    result: HyperbandResult
    group: int
    new_group: bool
    warm_configs: int


def search_with_groups(
    data: Dataset,
    store: GroupStore,
    dataset_id: str,
    dcn: Optional[float] = None,
    settings: Optional[HyperbandSettings] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
    stop: Callable[[], bool] = lambda: False,
    events: Optional[EventLog] = None,
    train_fn: TrainFn = train,
    lde: Optional[LifelongDatabase] = None,
) -> GroupedResult:
    """Hyperband warm-started with the best configurations of the dataset's group

    Without `dcn` the characterization number is computed, or read from the `lde` cache.
    The winner is recorded in the group and the store saved.
    """
    settings = settings or HyperbandSettings()
    if dcn is None:
        dcn = compute_dcn(data, lde=lde, seed=seed)
    group, created = store.assign(dataset_id, meta_features(data, dcn), settings.group_radius)
    warm = [scored.config for scored in group.best] if settings.warm_start else []
    result = run_hyperband(data, settings, ledger, seed, stop, events, warm, train_fn)
    if result.best is not None:
        group.record(result.best.config, result.best.accuracy)
    store.save()
    return GroupedResult(result=result, group=group.id, new_group=created, warm_configs=len(warm))
