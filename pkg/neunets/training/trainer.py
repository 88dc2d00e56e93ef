from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.metrics import accuracy_score

from neunets.arch.graph import NetworkGraph, initialize_weights, parameter_tensors, predict, run_graph
from neunets.arch.layers import BN_MOMENTUM, ForwardContext, LayerKind, LayerSpec
from neunets.arch.ordering import ancestors
from neunets.data.augment import augment
from neunets.data.datasets import Dataset, Split
from neunets.errors import NeunetsError
from neunets.tensor import ops
from neunets.tensor.autograd import NonFiniteError, backward
from neunets.tensor.optim import OptimizerConfig, make_optimizer
from neunets.training.events import EpochEvent, EventLog, now
from neunets.training.ledger import BudgetLedger

logger = logging.getLogger(__name__)


class DivergenceError(NeunetsError):
    def __init__(self, epoch: int, detail: str = "loss is not finite"):
        super().__init__(f"Training diverged in epoch {epoch}: {detail}")
        self.epoch = epoch


class NonChainGraphError(NeunetsError):
    pass


@dataclass
class TrainJob:
    graph: NetworkGraph
    data: Dataset
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 3
    patience: int = 3
    seed: int = 0
    augment: bool = False
    # layer ids whose weights are updated; None trains everything
    trainable: Optional[frozenset] = None
    job_id: str = "job"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"Epoch quota must be >= 1, got {self.epochs}")
        if self.patience < 1:
            raise ValueError(f"Patience must be >= 1, got {self.patience}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    holdout_accuracy: float


@dataclass
class TrainResult:
    graph: NetworkGraph
    curve: list[EpochRecord]
    seconds: float
    best_epoch: int
    stopped_by_budget: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.curve)

    @property
    def holdout_accuracy(self) -> float:
        """Holdout accuracy of the returned weights"""
        return max((record.holdout_accuracy for record in self.curve), default=0.0)


def evaluate_fitness(graph: NetworkGraph, split: Split, batch_size: int = 256) -> float:
    """Top-1 accuracy on a labeled split"""
    if len(split) == 0:
        return 0.0
    predicted = predict(graph, split.x, batch_size).argmax(axis=-1)
    return float(accuracy_score(split.y, predicted))


def _update_moving_stats(graph: NetworkGraph, ctx: ForwardContext, trainable: Optional[frozenset]) -> None:
    for lid, (mean, var) in ctx.batch_stats.items():
        if trainable is not None and lid not in trainable:
            continue
        buffers = graph.buffers[lid]
        buffers["moving_mean"] = (BN_MOMENTUM * buffers["moving_mean"] + (1 - BN_MOMENTUM) * mean).astype(np.float32)
        buffers["moving_var"] = (BN_MOMENTUM * buffers["moving_var"] + (1 - BN_MOMENTUM) * var).astype(np.float32)


def train_step(graph: NetworkGraph, x: np.ndarray, y: np.ndarray, optimizer, trainable, rng) -> tuple[float, int]:
    """One minibatch update of `graph`'s weights in place; returns the loss and the number correct"""
    params = parameter_tensors(graph, trainable)
    ctx = ForwardContext(training=True, rng=rng)
    target = graph.logits_id
    out = run_graph(graph, x, params, ctx, until=target)[target]
    loss = ops.softmax_cross_entropy(out, y)
    correct = int((out.data.argmax(axis=-1) == y).sum())
    if loss.creator is not None:
        grads = backward(loss)
        named = {f"{lid}/{name}": t for lid, tensors in params.items() for name, t in tensors.items() if t.requires_grad}
        optimizer.step(named, {key: grads[t] for key, t in named.items() if t in grads})
        for key, t in named.items():
            lid, name = key.split("/")
            graph.weights[int(lid)][name] = t.data.astype(np.float32)
    _update_moving_stats(graph, ctx, trainable)
    return float(loss.data), correct


def train(job: TrainJob, ledger: Optional[BudgetLedger] = None, events: Optional[EventLog] = None) -> TrainResult:
    """Minibatch training with best-holdout early stopping

    The returned graph carries the weights of the best holdout epoch. With a ledger no epoch
    starts unless the remaining budget covers the previous epoch's duration, an epoch that
    runs out of budget is abandoned and the ledger is never charged past its cap.

    :raises DivergenceError: when the loss or an activation stops being finite
    """
    rng = np.random.default_rng(job.seed)
    graph = job.graph.copy()
    optimizer = make_optimizer(job.optimizer)
    train_split = job.data.train
    batch_size = job.optimizer.batch_size
    use_augmentation = job.augment and job.data.domain == "image"
    curve: list[EpochRecord] = []
    best = (-1.0, 0, graph.copy())
    stale = 0
    stopped_by_budget = False
    started = time.perf_counter()
    last_epoch_seconds = 0.0

    for epoch in range(1, job.epochs + 1):
        if ledger is not None and (ledger.exhausted or ledger.remaining < last_epoch_seconds):
            stopped_by_budget = True
            logger.info(f"{job.job_id}: {ledger.remaining:.2f}s left, not enough for epoch {epoch}")
            break
        allowance = ledger.remaining if ledger is not None else math.inf
        epoch_start = time.perf_counter()
        order = rng.permutation(len(train_split))
        loss_sum, correct = 0.0, 0
        cut = False
        try:
            for start in range(0, len(order), batch_size):
                if time.perf_counter() - epoch_start >= allowance:
                    cut = True
                    break
                idx = order[start : start + batch_size]
                x = train_split.x[idx]
                if use_augmentation:
                    x = augment(x, rng)
                loss, hits = train_step(graph, x, train_split.y[idx], optimizer, job.trainable, rng)
                if not np.isfinite(loss):
                    raise DivergenceError(epoch)
                loss_sum += loss * len(idx)
                correct += hits
            holdout_accuracy = 0.0 if cut else evaluate_fitness(graph, job.data.holdout)
        except NonFiniteError as e:
            raise DivergenceError(epoch, str(e)) from e

        seconds = time.perf_counter() - epoch_start
        last_epoch_seconds = seconds
        if ledger is not None:
            ledger.charge_within_cap(seconds)
        if cut:
            # the unfinished epoch is dropped, the best finished one is returned
            stopped_by_budget = True
            logger.info(f"{job.job_id}: budget ran out during epoch {epoch}")
            break
        record = EpochRecord(epoch, loss_sum / max(len(order), 1), correct / max(len(order), 1), holdout_accuracy)
        curve.append(record)
        if events is not None:
            events.append(EpochEvent(job.job_id, epoch, record.train_loss, record.train_accuracy, holdout_accuracy, seconds, now()))
        logger.debug(f"{job.job_id} epoch {epoch}: loss {record.train_loss:.4f}, holdout {holdout_accuracy:.4f}")

        if holdout_accuracy > best[0]:
            best = (holdout_accuracy, epoch, graph.copy())
            stale = 0
        else:
            stale += 1
            if stale >= job.patience:
                logger.debug(f"{job.job_id}: no holdout improvement for {stale} epochs, stopping")
                break

    _, best_epoch, best_graph = best
    return TrainResult(
        graph=best_graph,
        curve=curve,
        seconds=time.perf_counter() - started,
        best_epoch=best_epoch,
        stopped_by_budget=stopped_by_budget,
    )


def chain_body(graph: NetworkGraph) -> list[int]:
    """Ids of the layers between the input front end and the classification head, in order

    :raises NonChainGraphError: if any layer merges inputs or feeds several layers
    """
    for spec in graph.layers:
        if len(spec.inputs) > 1 or len(graph.consumers(spec.id)) > 1:
            raise NonChainGraphError(f"Layer {spec.id} branches, incremental training needs a chain")
    body = []
    for spec in graph.ordered_layers():
        if spec.kind in (LayerKind.INPUT, LayerKind.EMBEDDING):
            continue
        if spec.kind in (LayerKind.GLOBAL_AVG_POOL, LayerKind.FULLY_CONNECTED, LayerKind.SOFTMAX):
            break
        body.append(spec.id)
    return body


def attach_head(graph: NetworkGraph, last_layer: int, rng: Union[int, np.random.Generator] = 0) -> NetworkGraph:
    """The sub-network ending at `last_layer` with a fresh global pooling and classifier head"""
    keep = ancestors(graph.dependencies(), last_layer)
    shapes = graph.shapes()
    layers = [spec for spec in graph.layers if spec.id in keep]
    next_id = graph.next_id()
    previous = last_layer
    if len(shapes[last_layer]) == 3:
        layers.append(LayerSpec(id=next_id, kind=LayerKind.GLOBAL_AVG_POOL, inputs=(previous,)))
        previous, next_id = next_id, next_id + 1
    layers.append(LayerSpec(id=next_id, kind=LayerKind.FULLY_CONNECTED, inputs=(previous,), channels=graph.meta.n_classes))
    layers.append(LayerSpec(id=next_id + 1, kind=LayerKind.SOFTMAX, inputs=(next_id,)))
    sub = NetworkGraph(
        layers=layers,
        meta=dataclasses.replace(graph.meta),
        weights={lid: {k: v.copy() for k, v in w.items()} for lid, w in graph.weights.items() if lid in keep},
        buffers={lid: {k: v.copy() for k, v in b.items()} for lid, b in graph.buffers.items() if lid in keep},
    )
    sub = initialize_weights(sub, rng)
    sub.validate()
    return sub


def incremental_train(
    graph: NetworkGraph,
    data: Dataset,
    optimizer: Optional[OptimizerConfig] = None,
    epochs: int = 3,
    patience: int = 3,
    seed: int = 0,
    ledger: Optional[BudgetLedger] = None,
    stages: Optional[Sequence[Sequence[int]]] = None,
) -> list[float]:
    """Holdout accuracy of every prefix of a chain network, growing it one layer at a time

    Each prefix is trained with a temporary classifier head while the layers trained for
    shorter prefixes stay frozen. `stages` groups layers that are added together (a residual
    block, say), each stage ending at its output layer; by default every layer of
    `chain_body` is its own stage.
    """
    optimizer = optimizer or OptimizerConfig()
    stages = [list(stage) for stage in stages] if stages is not None else [[lid] for lid in chain_body(graph)]
    front = [spec.id for spec in graph.layers if spec.kind == LayerKind.EMBEDDING]
    trained = graph.copy()
    accuracies = []
    for k, stage in enumerate(stages):
        prefix = attach_head(trained, stage[-1], rng=seed + k)
        head = {spec.id for spec in prefix.layers if not trained.has_layer(spec.id)}
        trainable = frozenset(head | set(stage) | (set(front) if k == 0 else set()))
        result = train(
            TrainJob(prefix, data, optimizer, epochs, patience, seed, trainable=trainable, job_id=f"prefix-{k + 1}"),
            ledger=ledger,
        )
        accuracies.append(result.holdout_accuracy)
        for lid in trainable - head:
            if lid in result.graph.weights:
                trained.weights[lid] = result.graph.weights[lid]
            if lid in result.graph.buffers:
                trained.buffers[lid] = result.graph.buffers[lid]
    return accuracies
