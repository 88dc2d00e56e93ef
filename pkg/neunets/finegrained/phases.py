"""Fine-grained synthesis: grow a hidden layer in front of the classifier, prune it, merge the
surviving connections into k shared filters and restore the outputs before the final training

Phases only move forward. Every phase returns a new `PhaseState`; the reference outputs of the
phase-0 network on the probe batch are shared read-only by all of them.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import lstsq
from sklearn.metrics import accuracy_score

from neunets.arch.graph import NetworkGraph, build_graph, run_graph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.data.datasets import Dataset
from neunets.errors import NeunetsError
from neunets.finegrained.layer import ACTIVATIONS, AbstractFineLayer, BaseLayer, GrownLayer, WeightBuckets
from neunets.finegrained.medoids import EXHAUSTIVE_LIMIT, k_medoids, normalize_rows
from neunets.morphisms.errors import ForbiddenPositionError
from neunets.morphisms.placement import produces_nonnegative
from neunets.tensor import ops
from neunets.tensor.autograd import DTYPE, NonFiniteError, backward
from neunets.tensor.optim import OptimizerConfig, make_optimizer
from neunets.training.ledger import BudgetLedger
from neunets.training.trainer import DivergenceError, TrainJob, train

logger = logging.getLogger(__name__)

RIDGE = 1e-6


class PhaseError(NeunetsError):
    pass


class PruneMetric(enum.Enum):
    # least change from the value right after growing is pruned first
    CHANGE = "change"
    ABSOLUTE = "absolute"
    VALUE = "value"


@dataclass
class FineGrainedConfig:
    # fraction of input neurons kept by phase 0
    keep_fraction: float = 0.5
    # hidden replicas per kept input neuron
    replicas: int = 3
    # inbound connections left per hidden neuron
    n_keep: int = 4
    prune_steps: int = 3
    prune_metric: PruneMetric = PruneMetric.CHANGE
    buckets: int = 8
    # None picks relu when the features are provably nonnegative, else linear
    activation: Optional[str] = None
    base_epochs: int = 20
    grow_epochs: int = 3
    prune_epochs: int = 2
    final_epochs: int = 20
    # phase 4 accepts the merged layer within this much holdout accuracy of phase 0
    tolerance: float = 0.02
    # retraining rounds phase 4 may spend getting there
    restore_rounds: int = 3
    patience: int = 3
    probe_size: int = 256
    ridge: float = RIDGE
    exhaustive_limit: int = EXHAUSTIVE_LIMIT
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not 0 < self.keep_fraction <= 1:
            raise ValueError(f"keep_fraction must lie in (0, 1], got {self.keep_fraction}")
        if min(self.replicas, self.n_keep, self.prune_steps, self.buckets, self.patience, self.probe_size, self.restore_rounds) < 1:
            raise ValueError("replicas, n_keep, prune_steps, buckets, patience, probe_size and restore_rounds must be >= 1")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if min(self.base_epochs, self.grow_epochs, self.prune_epochs, self.final_epochs) < 0:
            raise ValueError("Epoch counts must be >= 0")
        if self.activation is not None and self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")


@dataclass
class FeatureSet:
    """Values of the input neurons of the refined layer, all of them"""

    train_x: np.ndarray
    train_y: np.ndarray
    holdout_x: np.ndarray
    holdout_y: np.ndarray
    probe_x: np.ndarray


@dataclass
class PhaseReport:
    phase: int
    name: str
    params: int
    holdout_accuracy: float
    # largest output change right after growing
    init_deviation: Optional[float] = None
    # root mean square output mismatch left by the restoration
    residual: Optional[float] = None
    ridge: bool = False
    degrees: list[int] = field(default_factory=list)
    bucket_sizes: list[int] = field(default_factory=list)
    # retraining rounds of phase 4
    rounds: int = 0
    # phase 4 fell back to the phase-0 network
    fallback: bool = False


@dataclass
class PhaseState:
    phase: int
    # network whose final fully connected layer is refined
    source: NetworkGraph
    feature_layer: int
    features: FeatureSet
    selected: np.ndarray
    base: BaseLayer
    reference: np.ndarray
    base_params: int
    base_accuracy: float
    grown: Optional[GrownLayer] = None
    prune_schedule: list[int] = field(default_factory=list)
    reports: list[PhaseReport] = field(default_factory=list)

    @property
    def layer(self) -> AbstractFineLayer:
        return self.grown if self.grown is not None else self.base

    @property
    def probe(self) -> np.ndarray:
        return self.features.probe_x[:, self.selected]

    def advance(self, report: PhaseReport, **changes) -> PhaseState:
        return dataclasses.replace(self, phase=report.phase, reports=self.reports + [report], **changes)


def _require(state: PhaseState, phase: int) -> None:
    if state.phase != phase:
        raise PhaseError(f"Phase {phase + 1} needs the result of phase {phase}, the state is in phase {state.phase}")


def accuracy(layer: AbstractFineLayer, x: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    return float(accuracy_score(y, layer.outputs(x).argmax(axis=-1)))


def fit_layer(
    layer: AbstractFineLayer,
    features: FeatureSet,
    selected: np.ndarray,
    optimizer: OptimizerConfig,
    epochs: int,
    patience: int,
    seed: int = 0,
    ledger: Optional[BudgetLedger] = None,
    label: str = "finegrained",
) -> tuple[AbstractFineLayer, float]:
    """Minibatch training with best-holdout early stopping

    The untrained layer competes too, so the result is never worse on the holdout split than
    the input.

    :raises DivergenceError: when the loss stops being finite
    """
    train_x, holdout_x = features.train_x[:, selected], features.holdout_x[:, selected]
    best_layer, best_accuracy = layer.copy(), accuracy(layer, holdout_x, features.holdout_y)
    current = layer.copy()
    params = current.tensors()
    rng = np.random.default_rng(seed)
    opt = make_optimizer(optimizer)
    stale, last_seconds = 0, 0.0
    for epoch in range(1, epochs + 1):
        if ledger is not None and (ledger.exhausted or ledger.remaining < last_seconds):
            logger.info(f"{label}: {ledger.remaining:.2f}s left, not enough for epoch {epoch}")
            break
        started = time.perf_counter()
        order = rng.permutation(len(train_x))
        try:
            for start in range(0, len(order), optimizer.batch_size):
                idx = order[start : start + optimizer.batch_size]
                loss = ops.softmax_cross_entropy(current.forward(params, train_x[idx]), features.train_y[idx])
                if not np.isfinite(loss.data):
                    raise DivergenceError(epoch)
                grads = backward(loss)
                opt.step(params, {name: grads[t] for name, t in params.items() if t in grads})
        except NonFiniteError as e:
            raise DivergenceError(epoch, str(e)) from e
        current.load(params)
        holdout = accuracy(current, holdout_x, features.holdout_y)
        last_seconds = time.perf_counter() - started
        if ledger is not None:
            ledger.charge_within_cap(last_seconds)
        logger.debug(f"{label} epoch {epoch}: holdout {holdout:.4f}")
        if holdout > best_accuracy:
            best_layer, best_accuracy, stale = current.copy(), holdout, 0
        else:
            stale += 1
            if stale >= patience:
                break
    return best_layer, best_accuracy


def layer_features(graph: NetworkGraph, layer_id: int, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Inference-mode activations of one flat layer"""
    if len(x) == 0:
        return np.zeros((0,) + tuple(graph.shapes()[layer_id]), dtype=DTYPE)
    return np.concatenate(
        [run_graph(graph, x[start : start + batch_size], until=layer_id)[layer_id].data for start in range(0, len(x), batch_size)]
    )


def mean_absolute_activation(features: np.ndarray) -> np.ndarray:
    """Importance of every input neuron over a probe batch"""
    return np.abs(features.astype(np.float64)).mean(axis=0)


def select_neurons(importance: np.ndarray, keep_fraction: float) -> np.ndarray:
    """Ascending indices of the ceil(q * n) most important neurons; ties keep the lower index"""
    count = max(1, math.ceil(keep_fraction * len(importance)))
    ranked = np.argsort(-importance, kind="stable")
    return np.sort(ranked[:count])


def base_network(data: Dataset, config: FineGrainedConfig, ledger: Optional[BudgetLedger] = None, seed: int = 0) -> NetworkGraph:
    """A single fully connected layer from the inputs to the outputs, trained to early stop"""
    meta = data.meta()
    layers = [
        LayerSpec(id=0, kind=LayerKind.INPUT, shape=tuple(meta.input_shape)),
        LayerSpec(id=1, kind=LayerKind.FULLY_CONNECTED, inputs=(0,), channels=meta.n_classes),
        LayerSpec(id=2, kind=LayerKind.SOFTMAX, inputs=(1,)),
    ]
    graph = build_graph(layers, meta, seed)
    if config.base_epochs == 0:
        return graph
    job = TrainJob(graph, data, config.optimizer, config.base_epochs, config.patience, seed, job_id="finegrained-base")
    return train(job, ledger).graph


def phase0_select(
    graph: Optional[NetworkGraph],
    data: Dataset,
    config: Optional[FineGrainedConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
) -> PhaseState:
    """Picks the important input neurons of the final fully connected layer

    Without a network, a single fully connected layer over the (flat) inputs is trained first.
    When only part of the inputs is kept, the layer is retrained on them; that restricted
    layer is the phase-0 network every later phase is compared with.

    :raises PhaseError: when the network does not end in a fully connected layer over flat
        features, or when there is no network and the inputs are not flat
    """
    config = config or FineGrainedConfig()
    if graph is None:
        if len(data.input_shape) != 1:
            raise PhaseError(f"Without a starting network the inputs must be flat, got {data.input_shape}")
        graph = base_network(data, config, ledger, seed)
    logits_spec = graph.layer(graph.logits_id)
    if logits_spec.kind != LayerKind.FULLY_CONNECTED:
        raise PhaseError(f"The network must end in a fully connected layer, not {logits_spec.kind.value}")
    feature_layer = logits_spec.inputs[0]
    if len(graph.shapes()[feature_layer]) != 1:
        raise PhaseError(f"Layer {feature_layer} feeding the classifier is not flat")

    rng = np.random.default_rng(seed)
    train_x = layer_features(graph, feature_layer, data.train.x)
    probe_idx = np.sort(rng.choice(len(train_x), size=min(config.probe_size, len(train_x)), replace=False))
    features = FeatureSet(
        train_x=train_x,
        train_y=data.train.y,
        holdout_x=layer_features(graph, feature_layer, data.holdout.x),
        holdout_y=data.holdout.y,
        probe_x=train_x[probe_idx],
    )
    weights = graph.weights[logits_spec.id]
    full = BaseLayer(weights["kernel"].copy(), weights["bias"].copy())
    all_inputs = np.arange(full.kernel.shape[0])
    base_accuracy = accuracy(full, features.holdout_x, features.holdout_y)

    selected = select_neurons(mean_absolute_activation(features.probe_x), config.keep_fraction)
    base = BaseLayer(full.kernel[selected].copy(), full.bias.copy())
    phase0_accuracy = base_accuracy
    if len(selected) < len(all_inputs):
        base, phase0_accuracy = fit_layer(
            base, features, selected, config.optimizer, config.base_epochs, config.patience, seed, ledger, "phase 0"
        )
    reference = base.outputs(features.probe_x[:, selected])
    reference.flags.writeable = False
    logger.info(f"Phase 0: kept {len(selected)} of {len(all_inputs)} input neurons, holdout {phase0_accuracy:.4f}")
    return PhaseState(
        phase=0,
        source=graph,
        feature_layer=feature_layer,
        features=features,
        selected=selected,
        base=base,
        reference=reference,
        base_params=full.param_count(),
        base_accuracy=base_accuracy,
        reports=[PhaseReport(0, "select", base.param_count(), phase0_accuracy)],
    )


def _activation(state: PhaseState, requested: Optional[str]) -> str:
    nonnegative = produces_nonnegative(state.source, state.feature_layer)
    if requested is None:
        return "relu" if nonnegative else "linear"
    if requested == "relu" and not nonnegative:
        raise ForbiddenPositionError(
            f"ReLU has no identity on the outputs of layer {state.feature_layer}: its values may be negative"
        )
    return requested


def phase1_grow(
    state: PhaseState,
    replicas: int = 3,
    config: Optional[FineGrainedConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
) -> PhaseState:
    """Inserts a hidden layer of `replicas` neurons per kept input without changing the outputs

    Each input reaches its replicas with coefficients summing to 1 and each replica passes on
    the input's original output weights, so W'' Act(W' x) == W x while Act is the identity
    on the inputs.

    :raises ForbiddenPositionError: for ReLU over features that may be negative
    """
    _require(state, 0)
    config = config or FineGrainedConfig()
    if replicas < 1:
        raise PhaseError(f"replicas must be >= 1, got {replicas}")
    activation = _activation(state, config.activation)
    rng = np.random.default_rng(seed)
    n_inputs, _ = state.base.kernel.shape
    hidden = n_inputs * replicas
    coefficients = rng.dirichlet(np.ones(replicas), size=n_inputs)
    hidden_kernel = np.zeros((n_inputs, hidden), dtype=DTYPE)
    for i in range(n_inputs):
        hidden_kernel[i, i * replicas : (i + 1) * replicas] = coefficients[i]
    grown = GrownLayer(
        hidden_kernel=hidden_kernel,
        hidden_bias=np.zeros(hidden, dtype=DTYPE),
        output_kernel=np.repeat(state.base.kernel, replicas, axis=0).astype(DTYPE),
        output_bias=state.base.bias.astype(DTYPE),
        mask=np.ones((n_inputs, hidden), dtype=bool),
        initial_kernel=hidden_kernel.copy(),
        activation=activation,
    )
    deviation = float(np.abs(grown.outputs(state.probe) - state.reference).max())
    grown, holdout = fit_layer(
        grown, state.features, state.selected, config.optimizer, config.grow_epochs, config.patience, seed, ledger, "phase 1"
    )
    logger.info(f"Phase 1: {hidden} hidden neurons, initial deviation {deviation:.2e}, holdout {holdout:.4f}")
    return state.advance(PhaseReport(1, "grow", grown.param_count(), holdout, init_deviation=deviation), grown=grown)


def connection_scores(layer: GrownLayer, metric: PruneMetric) -> np.ndarray:
    """Per-connection pruning scores; the lowest are pruned first"""
    if metric == PruneMetric.CHANGE:
        return np.abs(layer.hidden_kernel - layer.initial_kernel)
    if metric == PruneMetric.ABSOLUTE:
        return np.abs(layer.hidden_kernel)
    return layer.hidden_kernel.copy()


def prune_schedule(fan_in: int, n_keep: int, steps: int) -> list[int]:
    """Target inbound degree after each pruning step, ending at `n_keep`"""
    return [int(round(fan_in - (fan_in - n_keep) * (s + 1) / steps)) for s in range(steps)]


def prune_step(layer: GrownLayer, degree: int, metric: PruneMetric) -> np.ndarray:
    """The mask with every hidden neuron's lowest-scoring connections removed down to `degree`"""
    scores = connection_scores(layer, metric)
    mask = layer.mask.copy()
    for h in range(layer.hidden_size):
        active = np.flatnonzero(mask[:, h])
        excess = len(active) - degree
        if excess > 0:
            ranked = active[np.argsort(scores[active, h], kind="stable")]
            mask[ranked[:excess], h] = False
    return mask


def phase2_prune(
    state: PhaseState,
    n_keep: int,
    steps: int = 1,
    metric: PruneMetric = PruneMetric.CHANGE,
    config: Optional[FineGrainedConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
) -> PhaseState:
    """Prunes the grown layer until every hidden neuron keeps `n_keep` inbound connections

    The layer is retrained after every step.

    :raises PhaseError: when `n_keep` exceeds the current fan-in or is below 1
    """
    _require(state, 1)
    config = config or FineGrainedConfig()
    grown = state.grown.copy()
    fan_in = grown.fan_in()
    if not 1 <= n_keep <= fan_in.min():
        raise PhaseError(f"Cannot keep {n_keep} connections per hidden neuron with a fan-in of {int(fan_in.min())}")
    if steps < 1:
        raise PhaseError(f"steps must be >= 1, got {steps}")
    schedule = prune_schedule(int(fan_in.max()), n_keep, steps)
    degrees = [int(fan_in.max())]
    holdout = accuracy(grown, state.features.holdout_x[:, state.selected], state.features.holdout_y)
    for step, degree in enumerate(schedule):
        grown.mask = prune_step(grown, degree, metric)
        grown.hidden_kernel = (grown.hidden_kernel * grown.mask).astype(DTYPE)
        degrees.append(int(grown.fan_in().max()))
        grown, holdout = fit_layer(
            grown,
            state.features,
            state.selected,
            config.optimizer,
            config.prune_epochs,
            config.patience,
            seed + step,
            ledger,
            f"phase 2 step {step + 1}",
        )
    logger.info(f"Phase 2: degrees {degrees}, holdout {holdout:.4f}")
    report = PhaseReport(2, "prune", grown.param_count(), holdout, degrees=degrees)
    return state.advance(report, grown=grown, prune_schedule=schedule)


def merge_buckets(layer: GrownLayer, k: int, exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> WeightBuckets:
    """Clusters the hidden neurons' inbound weight vectors by normalized shape into k buckets

    A bucket's shared vector is the mean normalized member vector scaled to the mean member norm.
    """
    fan_in = layer.fan_in()
    if fan_in.min() != fan_in.max():
        raise PhaseError("Hidden neurons must all have the same fan-in before merging")
    hidden = np.arange(layer.hidden_size)
    inputs = np.stack([np.flatnonzero(layer.mask[:, h]) for h in hidden])
    vectors = layer.hidden_kernel[inputs, hidden[:, None]].astype(np.float64)
    normalized = normalize_rows(vectors)
    clustering = k_medoids(normalized, k, exhaustive_limit)
    norms = np.linalg.norm(vectors, axis=1)
    shared = np.stack(
        [
            normalized[clustering.assignment == b].mean(axis=0) * norms[clustering.assignment == b].mean()
            for b in range(k)
        ]
    )
    return WeightBuckets(assignment=clustering.assignment.astype(np.int64), inputs=inputs, shared=shared.astype(DTYPE))


def phase3_merge(state: PhaseState, k: int, config: Optional[FineGrainedConfig] = None) -> PhaseState:
    """Ties the hidden neurons to k shared weight vectors, the custom filters of the layer

    :raises PhaseError: for k outside [1, number of hidden neurons]
    """
    _require(state, 2)
    config = config or FineGrainedConfig()
    grown = state.grown.copy()
    if not 1 <= k <= grown.hidden_size:
        raise PhaseError(f"k must lie in [1, {grown.hidden_size}], got {k}")
    grown.buckets = merge_buckets(grown, k, config.exhaustive_limit)
    sizes = [len(grown.buckets.members(b)) for b in range(k)]
    holdout = accuracy(grown, state.features.holdout_x[:, state.selected], state.features.holdout_y)
    logger.info(f"Phase 3: {grown.hidden_size} hidden neurons in {k} buckets of sizes {sizes}")
    return state.advance(PhaseReport(3, "merge", grown.param_count(), holdout, bucket_sizes=sizes), grown=grown)


@dataclass
class Restoration:
    kernel: np.ndarray
    bias: np.ndarray
    ridge: bool


def restore_outputs(layer: GrownLayer, x: np.ndarray, reference: np.ndarray, ridge: float = RIDGE) -> Restoration:
    """Output weights whose outputs on `x` best match `reference` in least squares

    A rank-deficient system is solved again with a ridge penalty.
    """
    hidden = layer.hidden_outputs(x)
    design = np.hstack([hidden, np.ones((len(hidden), 1))])
    solution, _, rank, _ = lstsq(design, reference)
    used_ridge = rank < design.shape[1]
    if used_ridge:
        columns = design.shape[1]
        solution, _, _, _ = lstsq(
            np.vstack([design, math.sqrt(ridge) * np.eye(columns)]),
            np.vstack([reference, np.zeros((columns, reference.shape[1]))]),
        )
        logger.warning(f"Output restoration is rank deficient ({rank} < {columns}), solved with ridge {ridge}")
    return Restoration(kernel=solution[:-1].astype(DTYPE), bias=solution[-1].astype(DTYPE), ridge=used_ridge)


def output_residual(layer: AbstractFineLayer, x: np.ndarray, reference: np.ndarray) -> float:
    """Root mean square difference between the layer's outputs and `reference`"""
    return float(np.sqrt(np.mean((layer.outputs(x) - reference) ** 2)))


def continuity_layer(state: PhaseState, activation: str) -> GrownLayer:
    """The phase-0 network as a merged layer: one hidden neuron per input, all tied to a weight of 1"""
    n_inputs = len(state.selected)
    identity = np.eye(n_inputs, dtype=DTYPE)
    return GrownLayer(
        hidden_kernel=identity,
        hidden_bias=np.zeros(n_inputs, dtype=DTYPE),
        output_kernel=state.base.kernel.astype(DTYPE),
        output_bias=state.base.bias.astype(DTYPE),
        mask=identity.astype(bool),
        initial_kernel=identity.copy(),
        activation=activation,
        buckets=WeightBuckets(
            assignment=np.zeros(n_inputs, dtype=np.int64),
            inputs=np.arange(n_inputs, dtype=np.int64)[:, None],
            shared=np.ones((1, 1), dtype=DTYPE),
        ),
    )


def phase4_reinit_retrain(
    state: PhaseState,
    config: Optional[FineGrainedConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
) -> PhaseState:
    """Re-solves the output weights against the phase-0 outputs, then trains to early stop

    Training is repeated, up to `restore_rounds` times, until the holdout accuracy is within
    `tolerance` of phase 0. A layer that never gets there is replaced by the phase-0 network.
    """
    _require(state, 3)
    config = config or FineGrainedConfig()
    target = state.reports[0].holdout_accuracy - config.tolerance
    grown = state.grown.copy()
    restoration = restore_outputs(grown, state.probe, state.reference, config.ridge)
    grown.output_kernel, grown.output_bias = restoration.kernel, restoration.bias
    residual = output_residual(grown, state.probe, state.reference)
    holdout, rounds = 0.0, 0
    while rounds < config.restore_rounds:
        grown, holdout = fit_layer(
            grown,
            state.features,
            state.selected,
            config.optimizer,
            config.final_epochs,
            config.patience,
            seed + rounds,
            ledger,
            f"phase 4 round {rounds + 1}",
        )
        rounds += 1
        if holdout >= target or (ledger is not None and ledger.exhausted):
            break
    fallback = holdout < target
    if fallback:
        grown = continuity_layer(state, grown.activation)
        holdout = accuracy(grown, state.features.holdout_x[:, state.selected], state.features.holdout_y)
        logger.warning(f"Phase 4: merged layer stays below {target:.4f} after {rounds} rounds, keeping the phase-0 network")
    logger.info(f"Phase 4: restoration residual {residual:.2e}, holdout {holdout:.4f}")
    report = PhaseReport(
        4, "restore", grown.param_count(), holdout, residual=residual, ridge=restoration.ridge, rounds=rounds, fallback=fallback
    )
    return state.advance(report, grown=grown)


def export_graph(state: PhaseState) -> NetworkGraph:
    """The source network with the grown layer folded into two fully connected layers

    Unselected and pruned connections become zeros and tied weights are written out.
    """
    if state.grown is None:
        raise PhaseError("Nothing has been grown yet")
    grown = state.grown
    graph = state.source.copy()
    logits_spec = graph.layer(graph.logits_id)
    hidden_id = graph.next_id()
    hidden_spec = LayerSpec(
        id=hidden_id,
        kind=LayerKind.FULLY_CONNECTED,
        inputs=(state.feature_layer,),
        channels=grown.hidden_size,
        activation="relu" if grown.activation == "relu" else None,
    )
    layers = []
    for spec in graph.layers:
        if spec.id == logits_spec.id:
            layers += [hidden_spec, dataclasses.replace(spec, inputs=(hidden_id,))]
        else:
            layers.append(spec)
    graph.layers = layers
    kernel = np.zeros((state.features.probe_x.shape[1], grown.hidden_size), dtype=DTYPE)
    kernel[state.selected] = grown.effective_kernel()
    graph.weights[hidden_id] = {"kernel": kernel, "bias": grown.hidden_bias.copy()}
    graph.weights[logits_spec.id] = {"kernel": grown.output_kernel.copy(), "bias": grown.output_bias.copy()}
    graph.validate()
    return graph


@dataclass
class FineGrainedResult:
    graph: NetworkGraph
    state: PhaseState
    base_accuracy: float
    phase0_accuracy: float
    final_accuracy: float
    base_params: int
    # parameters of the refined layer counting each shared filter once
    final_params: int

    @property
    def reports(self) -> list[PhaseReport]:
        return self.state.reports


def synthesize_filters(
    data: Dataset,
    graph: Optional[NetworkGraph] = None,
    config: Optional[FineGrainedConfig] = None,
    ledger: Optional[BudgetLedger] = None,
    seed: int = 0,
) -> FineGrainedResult:
    """All five phases; `n_keep` and the bucket count shrink to what the grown layer allows"""
    config = config or FineGrainedConfig()
    state = phase0_select(graph, data, config, ledger, seed)
    state = phase1_grow(state, config.replicas, config, ledger, seed)
    n_keep = min(config.n_keep, int(state.grown.fan_in().min()))
    state = phase2_prune(state, n_keep, config.prune_steps, config.prune_metric, config, ledger, seed)
    state = phase3_merge(state, min(config.buckets, state.grown.hidden_size), config)
    state = phase4_reinit_retrain(state, config, ledger, seed)
    return FineGrainedResult(
        graph=export_graph(state),
        state=state,
        base_accuracy=state.base_accuracy,
        phase0_accuracy=state.reports[0].holdout_accuracy,
        final_accuracy=state.reports[-1].holdout_accuracy,
        base_params=state.base_params,
        final_params=state.grown.param_count(),
    )
