from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph
from neunets.data.datasets import Dataset
from neunets.errors import NeunetsError
from neunets.search.tapas.dcn import ProbeNetConfig, compute_dcn
from neunets.search.tapas.lde import DCN_THRESHOLD, ExperimentRecord, LifelongDatabase, dataset_fingerprint
from neunets.search.tapas.predictor import TapConfig, TapModel, predict_rollouts, train_tap
from neunets.search.tapas.space import ChainArchitecture, ChainSpaceConfig, decode_chain, sample_chain
from neunets.tensor.optim import OptimizerConfig
from neunets.training.events import EventLog, now
from neunets.training.ledger import BudgetLedger
from neunets.training.pool import TrainFn, run_parallel
from neunets.training.trainer import TrainJob, incremental_train, train

logger = logging.getLogger(__name__)


class InsufficientExperienceError(NeunetsError):
    def __init__(self, dcn: float, tau: float, known: int):
        super().__init__(
            f"The lifelong database holds no experiment on a dataset with characterization number within "
            f"{tau} of {dcn:.3f} ({known} experiments in total). Run `neunets lde init` on a similar dataset "
            f"or `neunets lde import` an LDE file first."
        )
        self.dcn = dcn
        self.tau = tau


def _search_space() -> ChainSpaceConfig:
    # small kernels keep candidate training affordable on one CPU
    return ChainSpaceConfig(max_receptive_field=7)


@dataclass
class TapasConfig:
    n_candidates: int = 100
    # candidates trained for real, best predicted first
    top_m: int = 5
    tau: float = DCN_THRESHOLD
    epochs: int = 10
    patience: int = 3
    max_workers: int = 2
    augment: bool = False
    space: ChainSpaceConfig = field(default_factory=_search_space)
    tap: TapConfig = field(default_factory=TapConfig)
    probe: ProbeNetConfig = field(default_factory=ProbeNetConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError(f"n_candidates must be >= 1, got {self.n_candidates}")
        if not 1 <= self.top_m <= self.n_candidates:
            raise ValueError(f"top_m must lie in [1, {self.n_candidates}], got {self.top_m}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")


@dataclass
class RankedCandidate:
    index: int
    chain: ChainArchitecture
    predicted: float


@dataclass
class TapasEvent:
    rank: int
    candidate: int
    predicted: float
    measured: float
    epochs: int
    timestamp: datetime.datetime


@dataclass
class TapasResult:
    graph: NetworkGraph
    chain: ChainArchitecture
    predicted: float
    fitness: float
    dcn: float
    ranking: list[RankedCandidate]
    # measured holdout accuracy per trained rank
    measured: list[float]


def rank_candidates(tap: TapModel, chains: Sequence[ChainArchitecture], meta: GraphMeta, dcn: float) -> list[RankedCandidate]:
    """Chains sorted by predicted accuracy, best first; ties keep sampling order"""
    predictions = [rollout[-1] for rollout in predict_rollouts(tap, chains, meta, dcn)]
    ranked = [RankedCandidate(i, chain, p) for i, (chain, p) in enumerate(zip(chains, predictions))]
    return sorted(ranked, key=lambda c: (-c.predicted, c.index))


def tapas_search(
    data: Dataset,
    config: Optional[TapasConfig] = None,
    lde: Optional[LifelongDatabase] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
    stop: Callable[[], bool] = lambda: False,
    events: Optional[EventLog] = None,
    tap: Optional[TapModel] = None,
    train_fn: TrainFn = train,
) -> TapasResult:
    """Sample chains, rank them with the accuracy predictor and train the most promising ones

    The best predicted candidate is always trained; the others follow in batches of
    `max_workers` while budget remains. The winner is the best measured holdout accuracy.

    :raises InsufficientExperienceError: if the LDE knows no dataset close enough to this one
    """
    config = config or TapasConfig()
    lde = lde if lde is not None else LifelongDatabase()
    meta = data.meta()
    dcn = compute_dcn(data, config.probe, lde, seed)
    if tap is None:
        records = lde.select(dcn, config.tau)
        if not records:
            raise InsufficientExperienceError(dcn, config.tau, len(lde))
        logger.info(f"Training the accuracy predictor on {len(records)} experiments near {dcn:.3f}")
        tap = train_tap(records, config.tap)

    rng = np.random.default_rng(seed)
    chains = [sample_chain(meta, rng, config.space) for _ in range(config.n_candidates)]
    ranking = rank_candidates(tap, chains, meta, dcn)
    logger.info(f"Best predicted accuracy {ranking[0].predicted:.4f} of {len(ranking)} candidates")

    top = ranking[: config.top_m]
    graphs = [decode_chain(c.chain, meta, rng=seed + c.index, embedding_dim=config.space.embedding_dim).graph for c in top]

    def job(rank: int) -> TrainJob:
        return TrainJob(
            graphs[rank],
            data,
            config.optimizer,
            epochs=config.epochs,
            patience=config.patience,
            seed=seed + rank,
            augment=config.augment,
            job_id=f"tapas-{rank}",
        )

    measured: list[float] = []
    trained: list[NetworkGraph] = []

    def collect(outcomes) -> None:
        for outcome in outcomes:
            rank = len(measured)
            if outcome.ok:
                fitness, graph, epochs = outcome.result.holdout_accuracy, outcome.result.graph, outcome.result.epochs_run
            else:
                fitness, graph, epochs = 0.0, outcome.job.graph, 0
            measured.append(fitness)
            trained.append(graph)
            candidate = top[rank]
            logger.info(f"Rank {rank} (candidate {candidate.index}): predicted {candidate.predicted:.4f}, measured {fitness:.4f}")
            if events is not None:
                events.append(TapasEvent(rank, candidate.index, candidate.predicted, fitness, epochs, now()))

    # trained on a spent budget too, charged afterwards
    first = run_parallel([job(0)], 1, None, events, train_fn)
    if ledger is not None and first[0].ok:
        ledger.charge(first[0].result.seconds)
    collect(first)
    while len(measured) < len(top):
        if ledger is not None and ledger.exhausted:
            logger.info(f"Budget exhausted after training {len(measured)} candidates")
            break
        if stop():
            logger.info(f"Stop requested after training {len(measured)} candidates")
            break
        batch = [job(rank) for rank in range(len(measured), min(len(measured) + config.max_workers, len(top)))]
        collect(run_parallel(batch, config.max_workers, ledger, events, train_fn))

    best = int(np.argmax(measured))
    return TapasResult(
        graph=trained[best],
        chain=top[best].chain,
        predicted=top[best].predicted,
        fitness=measured[best],
        dcn=dcn,
        ranking=ranking,
        measured=measured,
    )


def initialize_lde(
    lde: LifelongDatabase,
    datasets: Sequence[Dataset],
    n_networks: int = 30,
    space: Optional[ChainSpaceConfig] = None,
    optimizer: Optional[OptimizerConfig] = None,
    epochs: int = 3,
    patience: int = 3,
    probe: Optional[ProbeNetConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
) -> int:
    """Trains sampled chains incrementally and records the accuracy of every prefix

    Returns the number of records added.
    """
    space = space or _search_space()
    optimizer = optimizer or OptimizerConfig()
    rng = np.random.default_rng(seed)
    added = 0
    for dataset in datasets:
        dcn = compute_dcn(dataset, probe, lde, seed)
        dataset_id = dataset_fingerprint(dataset)
        meta = dataset.meta()
        for j in range(n_networks):
            if ledger is not None and ledger.exhausted:
                logger.info(f"Budget exhausted, {added} records added")
                return added
            chain = sample_chain(meta, rng, space)
            decoded = decode_chain(chain, meta, rng=rng, embedding_dim=space.embedding_dim)
            accuracies = incremental_train(
                decoded.graph, dataset, optimizer, epochs, patience, seed + j, ledger, stages=decoded.stages
            )
            record = ExperimentRecord(
                chain=chain,
                dataset_id=dataset_id,
                dcn=dcn,
                n_classes=dataset.n_classes,
                accuracies=accuracies,
                input_shape=tuple(meta.input_shape),
                hyperparameters={
                    "learning_rate": optimizer.learning_rate,
                    "batch_size": float(optimizer.batch_size),
                    "epochs": float(epochs),
                },
                domain=meta.domain,
                vocab_size=meta.vocab_size,
            )
            added += lde.append(record)
            logger.info(f"Dataset {dataset_id} network {j + 1}/{n_networks}: final accuracy {accuracies[-1]:.4f}")
    return added
