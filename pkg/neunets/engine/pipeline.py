"""The synthesis pipeline: one owner process drives the cycle loop of a synthesizer

    created -> validated -> synthesizing -> finalizing -> completed
                                         -> stopped | failed

A cycle asks the synthesizer for proposals, trains them in parallel, reports the results back
and checkpoints. The loop ends when the synthesizer is satisfied, the cycle limit is reached,
the budget is spent or a stop is requested. Stop requests and the budget are only looked at
between cycles.
"""
from __future__ import annotations

import dataclasses
import datetime
import functools
import logging
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from neunets.arch.layers import LayerKind
from neunets.data.budget import Budget
from neunets.data.datasets import Dataset
from neunets.engine.config import RunConfig, load_dataset
from neunets.engine.export import export_model
from neunets.engine.settings import Settings
from neunets.engine.snapshots import PipelineStore
from neunets.engine.state import CandidateRecord, CycleSummary, PipelineState, Stage
from neunets.errors import NeunetsError
from neunets.finegrained.phases import FineGrainedConfig, PhaseError, synthesize_filters
from neunets.search.plugin import (
    AbstractSynthesizer,
    Assessment,
    CandidateResult,
    Proposal,
    SynthesisContext,
    get_synthesizer,
)
from neunets.search.tapas.lde import dataset_fingerprint
from neunets.training.events import EventLog, now
from neunets.training.ledger import BudgetLedger
from neunets.training.pool import TrainFn, run_parallel
from neunets.training.trainer import evaluate_fitness, train

logger = logging.getLogger(__name__)

STOP_BY_USER = "user"
STOP_BY_BUDGET = "budget"

CheckpointHook = Callable[[PipelineState], None]


@dataclass
class CandidateEvent:
    pipeline: str
    cycle: int
    candidate: int
    label: str
    fitness: float
    epochs: int
    failed: bool
    timestamp: datetime.datetime


def new_pipeline_id(config: RunConfig) -> str:
    return f"{config.algorithm}-{uuid.uuid4().hex[:8]}"


def create_pipeline(config: RunConfig, settings: Settings, pipeline_id: Optional[str] = None) -> PipelineState:
    """Persist a new pipeline for a config that `validate_request` produced"""
    store = PipelineStore(settings.pipelines_dir)
    state = PipelineState(id=pipeline_id or new_pipeline_id(config), config=config)
    store.checkpoint(state)
    logger.info(f"Created pipeline {state.id} ({config.algorithm}, {config.tier.value} budget)")
    return state


class Pipeline:
    def __init__(
        self,
        state: PipelineState,
        settings: Settings,
        synthesizer: Optional[AbstractSynthesizer] = None,
        data: Optional[Dataset] = None,
        train_fn: TrainFn = train,
        finegrain: Optional[FineGrainedConfig] = None,
        on_checkpoint: Optional[CheckpointHook] = None,
    ):
        self.state = state
        self.settings = settings
        self.store = PipelineStore(settings.pipelines_dir)
        self.data = data if data is not None else load_dataset(state.config)
        self.synthesizer = synthesizer or get_synthesizer(state.config.algorithm)()
        self.train_fn = train_fn
        self.finegrain = finegrain or FineGrainedConfig()
        self.on_checkpoint = on_checkpoint
        self.ledger = BudgetLedger(state.config.cap_seconds, consumed=state.consumed_seconds)
        self.events = EventLog(self.store.directory(state.id) / "events.jsonl")

    @property
    def context(self) -> SynthesisContext:
        config = self.state.config
        return SynthesisContext(
            data=self.data,
            budget=Budget(config.tier, config.cap_seconds),
            seed=config.seed,
            dataset_id=dataset_fingerprint(self.data),
            load_model=functools.partial(self.store.load_model, self.state.id),
            epochs=config.epochs,
            max_workers=config.max_workers,
            warm_start=config.warm_start,
            lde_path=self.settings.lde_path,
            group_store_path=self.settings.group_store,
        )

    def checkpoint(self) -> None:
        self.state.consumed_seconds = self.ledger.consumed
        self.state.updated = now()
        self.store.checkpoint(self.state)
        if self.on_checkpoint is not None:
            self.on_checkpoint(self.state)

    def run(self) -> PipelineState:
        """Drive the pipeline from its current stage to a terminal one"""
        state = self.state
        if state.stage.terminal:
            logger.info(f"Pipeline {state.id} already {state.stage.value}")
            return state
        try:
            if state.stage is Stage.CREATED:
                state.transition(Stage.VALIDATED)
                self.checkpoint()
            if state.stage is Stage.VALIDATED:
                if self.store.stop_requested(state.id):
                    return self._stop(STOP_BY_USER)
                self.synthesizer.initialize(self.context)
                state.synthesizer = self.synthesizer.state()
                state.transition(Stage.SYNTHESIZING)
                self.checkpoint()
            else:
                self.synthesizer.restore(self.context, state.synthesizer)
            while state.stage is Stage.SYNTHESIZING:
                self._cycle()
            if state.stage is Stage.FINALIZING:
                self._finalize()
        except NeunetsError as e:
            self._fail(e)
        except Exception as e:
            logger.exception(f"Pipeline {state.id} failed")
            self._fail(e)
        return state

    def _stop_reason(self) -> Optional[str]:
        if self.store.stop_requested(self.state.id):
            return STOP_BY_USER
        # the first candidates are trained even on a spent budget
        if self.state.best is not None and self.ledger.exhausted:
            return STOP_BY_BUDGET
        return None

    def _cycle(self) -> None:
        state = self.state
        reason = self._stop_reason()
        if reason is not None:
            self._stop(reason)
            return
        cycle = state.cycle + 1
        proposals = self.synthesizer.propose(cycle)
        if not proposals:
            logger.info(f"Pipeline {state.id}: nothing left to propose after cycle {state.cycle}")
            state.transition(Stage.FINALIZING)
            self.checkpoint()
            return
        results = self._train(proposals, cycle)
        self.synthesizer.report(results)
        assessment = self.synthesizer.assess()
        synthesizer_state = self.synthesizer.state()

        # nothing of the cycle reaches the state before the synthesizer accepted it
        for result in results:
            state.add_candidate(self._record(result, cycle))
        state.cycle = cycle
        state.synthesizer = synthesizer_state
        state.history.append(
            CycleSummary(cycle, [r.candidate for r in results], state.best_fitness, self.ledger.consumed, now())
        )
        logger.info(
            f"Pipeline {state.id} cycle {cycle}: {len(results)} candidates, best {state.best_fitness:.4f}, "
            f"{self.ledger.consumed:.1f}s of {self.ledger.cap_seconds:.0f}s"
        )
        limit = state.config.max_cycles
        if assessment is Assessment.SATISFIED or (limit is not None and cycle >= limit):
            state.transition(Stage.FINALIZING)
        self.checkpoint()

    def _record(self, result: CandidateResult, cycle: int, final: bool = False) -> CandidateRecord:
        return CandidateRecord(
            id=result.candidate,
            cycle=cycle,
            label=result.proposal.label,
            fitness=result.fitness,
            epochs=result.epochs,
            parent=result.proposal.parent,
            failed=result.failed,
            final=final,
        )

    def _seed_embeddings(self, proposal: Proposal) -> Proposal:
        table = getattr(self.data, "embeddings", None)
        if table is None or proposal.parent is not None:
            return proposal
        graph = proposal.graph.copy()
        for spec in graph.layers:
            current = graph.weights.get(spec.id, {}).get("table")
            if spec.kind is LayerKind.EMBEDDING and current is not None and current.shape == table.shape:
                graph.weights[spec.id]["table"] = table.astype(current.dtype)
        return dataclasses.replace(proposal, graph=graph)

    def _train(self, proposals: list[Proposal], cycle: int) -> list[CandidateResult]:
        """Train proposals as the next candidates; failures only fail their own candidate"""
        first_id = len(self.state.candidates)
        proposals = [self._seed_embeddings(p) for p in proposals]
        jobs = [p.job(self.data, f"candidate-{first_id + i}") for i, p in enumerate(proposals)]
        outcomes = [None] * len(jobs)
        workers = self.state.config.max_workers
        guaranteed = [i for i, p in enumerate(proposals) if p.guaranteed]
        budgeted = [i for i, p in enumerate(proposals) if not p.guaranteed]
        for i, outcome in zip(guaranteed, run_parallel([jobs[i] for i in guaranteed], workers, None, self.events, self.train_fn)):
            if outcome.ok:
                self.ledger.charge(outcome.result.seconds)
            outcomes[i] = outcome
        for i, outcome in zip(budgeted, run_parallel([jobs[i] for i in budgeted], workers, self.ledger, self.events, self.train_fn)):
            outcomes[i] = outcome

        results = []
        for i, (proposal, outcome) in enumerate(zip(proposals, outcomes)):
            candidate = first_id + i
            if outcome.ok:
                graph, epochs = outcome.result.graph, outcome.result.epochs_run
                # an untrained network keeps the function, and the accuracy, it was proposed with
                fitness = outcome.result.holdout_accuracy if epochs else evaluate_fitness(graph, self.data.holdout)
                result = CandidateResult(candidate, proposal, graph, fitness, epochs)
            else:
                result = CandidateResult(candidate, proposal, proposal.graph, 0.0, 0, failed=True)
            self.store.save_model(self.state.id, candidate, result.graph)
            self.events.append(
                CandidateEvent(self.state.id, cycle, candidate, proposal.label, result.fitness, result.epochs, result.failed, now())
            )
            results.append(result)
        return results

    def _best_result(self) -> CandidateResult:
        best = self.state.best_candidate
        graph = self.store.load_model(self.state.id, best.id)
        proposal = Proposal(best.label, graph, None, epochs=1, patience=1, seed=self.state.config.seed, parent=best.parent)
        return CandidateResult(best.id, proposal, graph, best.fitness, best.epochs, best.failed)

    def _finalize(self) -> None:
        state = self.state
        if state.best is None:
            raise NeunetsError(f"Pipeline {state.id} has no candidate to finalize")
        if not state.finalized:
            proposals = self.synthesizer.finalize(self._best_result())
            if proposals and not self.ledger.exhausted:
                for result in self._train(proposals, state.cycle):
                    state.add_candidate(self._record(result, state.cycle, final=True))
            if state.config.finegrain:
                self._refine()
            state.finalized = True
            self.checkpoint()
        state.transition(Stage.COMPLETED)
        self._export()

    def _refine(self) -> None:
        """Fine-grained post-pass on the winner, kept when its holdout accuracy is not worse"""
        state = self.state
        if self.ledger.exhausted:
            logger.info(f"Pipeline {state.id}: no budget left for the fine-grained pass")
            return
        best = self._best_result()
        try:
            refined = synthesize_filters(self.data, best.graph, self.finegrain, self.ledger, state.config.seed)
        except PhaseError as e:
            logger.warning(f"Pipeline {state.id}: fine-grained pass not applicable: {e}")
            return
        state.finegrain_reports = refined.reports
        fitness = evaluate_fitness(refined.graph, self.data.holdout)
        logger.info(f"Fine-grained pass: holdout {fitness:.4f} against {best.fitness:.4f}")
        if fitness < best.fitness:
            return
        candidate = len(state.candidates)
        self.store.save_model(state.id, candidate, refined.graph)
        state.add_candidate(
            CandidateRecord(candidate, state.cycle, "fine-grained refinement", fitness, 0, parent=best.candidate, final=True)
        )
        state.finegrained = True

    def _export(self) -> None:
        state = self.state
        directory = Path(state.config.out) if state.config.out else self.store.directory(state.id) / "export"
        graph = self.store.load_model(state.id, state.best)
        export_model(state, graph, self.data, directory)
        state.export_dir = str(directory)
        self.checkpoint()

    def _stop(self, reason: str) -> PipelineState:
        state = self.state
        logger.info(f"Pipeline {state.id} stopping ({reason}) after cycle {state.cycle}")
        state.stop_reason = reason
        state.transition(Stage.STOPPED)
        if state.best is not None:
            self._export()
        else:
            self.checkpoint()
        return state

    def _fail(self, error: Exception) -> None:
        state = self.state
        if state.stage.terminal:
            raise error
        # the cycle in flight never reached the state, so it stays what the last snapshot holds
        state.failure = f"{type(error).__name__}: {error}"
        state.transition(Stage.FAILED)
        self.checkpoint()
        logger.error(f"Pipeline {state.id} failed: {state.failure}")


def run_pipeline(
    config: RunConfig,
    settings: Settings,
    pipeline_id: Optional[str] = None,
    synthesizer: Optional[AbstractSynthesizer] = None,
    data: Optional[Dataset] = None,
    train_fn: TrainFn = train,
    finegrain: Optional[FineGrainedConfig] = None,
    on_checkpoint: Optional[CheckpointHook] = None,
) -> PipelineState:
    state = create_pipeline(config, settings, pipeline_id)
    return Pipeline(state, settings, synthesizer, data, train_fn, finegrain, on_checkpoint).run()


def resume_pipeline(
    pipeline_id: str,
    settings: Settings,
    synthesizer: Optional[AbstractSynthesizer] = None,
    data: Optional[Dataset] = None,
    train_fn: TrainFn = train,
    finegrain: Optional[FineGrainedConfig] = None,
    on_checkpoint: Optional[CheckpointHook] = None,
) -> PipelineState:
    """Continue a pipeline from its last snapshot

    :raises UnknownPipelineError: if there is no such pipeline
    """
    state = PipelineStore(settings.pipelines_dir).restore(pipeline_id)
    if state.stage.terminal:
        logger.info(f"Pipeline {pipeline_id} already {state.stage.value}, nothing to resume")
        return state
    logger.info(f"Resuming pipeline {pipeline_id} at cycle {state.cycle} ({state.stage.value})")
    return Pipeline(state, settings, synthesizer, data, train_fn, finegrain, on_checkpoint).run()


def stop_pipeline(pipeline_id: str, settings: Settings) -> PipelineState:
    """Ask a pipeline to stop at its next cycle boundary; a finished pipeline is left alone

    :raises UnknownPipelineError: if there is no such pipeline
    """
    store = PipelineStore(settings.pipelines_dir)
    state = store.restore(pipeline_id)
    if state.stage.terminal:
        logger.info(f"Pipeline {pipeline_id} is already {state.stage.value}")
        return state
    store.request_stop(pipeline_id)
    logger.info(f"Stop requested for pipeline {pipeline_id}")
    return state


@dataclass
class PipelineStatus:
    id: str
    stage: Stage
    cycle: int
    algorithm: str
    selection_reason: str
    tier: str
    consumed_seconds: float
    remaining_seconds: float
    best_candidate: Optional[int]
    best_fitness: float
    candidates: list[CandidateRecord]
    stop_requested: bool
    stop_reason: Optional[str] = None
    failure: Optional[str] = None
    export_dir: Optional[str] = None


def pipeline_status(pipeline_id: str, settings: Settings) -> PipelineStatus:
    """
    :raises UnknownPipelineError: if there is no such pipeline
    """
    store = PipelineStore(settings.pipelines_dir)
    state = store.restore(pipeline_id)
    return PipelineStatus(
        id=state.id,
        stage=state.stage,
        cycle=state.cycle,
        algorithm=state.config.algorithm,
        selection_reason=state.config.selection_reason,
        tier=state.config.tier.value,
        consumed_seconds=state.consumed_seconds,
        remaining_seconds=max(state.config.cap_seconds - state.consumed_seconds, 0.0),
        best_candidate=state.best,
        best_fitness=state.best_fitness,
        candidates=list(state.candidates),
        stop_requested=store.stop_requested(pipeline_id),
        stop_reason=state.stop_reason,
        failure=state.failure,
        export_dir=state.export_dir,
    )
