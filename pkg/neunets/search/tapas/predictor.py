"""The train-less accuracy predictor

Two stacked LSTMs read the encoded layer pair as a two-step sequence; the last hidden state of
the second, joined with the dataset characterization number, feeds one sigmoid unit that
predicts the accuracy after the next layer.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit
from sklearn.preprocessing import StandardScaler

from neunets.arch.graph import GraphMeta
from neunets.codec import from_dto, to_dto
from neunets.errors import NeunetsError
from neunets.search.tapas.encoding import N_FEATURES, ChainEncoding, encode_chain, initial_accuracy
from neunets.search.tapas.lde import ExperimentRecord
from neunets.search.tapas.space import ChainArchitecture
from neunets.tensor import ops
from neunets.tensor.autograd import Tensor, backward, parameter
from neunets.tensor.init import he_normal
from neunets.tensor.lstm import LSTMParams, lstm_forward
from neunets.tensor.optim import OptimizerConfig, OptimizerKind, make_optimizer

logger = logging.getLogger(__name__)

TAP_FORMAT_VERSION = 1


class EmptyTrainingSetError(NeunetsError):
    pass


class TapFormatError(NeunetsError):
    pass


@dataclass
class TapConfig:
    hidden: tuple[int, int] = (50, 100)
    learning_rate: float = 1e-3
    batch_size: int = 512
    epochs: int = 100
    seed: int = 0
    embedding_dim: int = 32


@dataclass
class TrainingPairs:
    x: np.ndarray  # [n, 2, N_FEATURES]
    dcn: np.ndarray  # [n]
    target: np.ndarray  # [n]

    def __len__(self) -> int:
        return len(self.target)


def training_pairs(records: Sequence[ExperimentRecord], embedding_dim: int = 32) -> TrainingPairs:
    """One pair per chain element: the known accuracy A_i before it, the target A_(i+1) after it"""
    xs, dcns, targets = [], [], []
    for record in records:
        encoding = encode_chain(record.chain, record.meta(), embedding_dim)
        accuracies = [initial_accuracy(record.n_classes)] + list(record.accuracies)
        for i in range(len(record.chain)):
            xs.append(encoding.pair(i, accuracies[i]))
            dcns.append(record.dcn)
            targets.append(accuracies[i + 1])
    if not xs:
        return TrainingPairs(np.zeros((0, 2, N_FEATURES)), np.zeros(0), np.zeros(0))
    return TrainingPairs(np.stack(xs), np.asarray(dcns, dtype=np.float64), np.asarray(targets, dtype=np.float64))


@dataclass
class TapModel:
    weights: dict[str, np.ndarray]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    dcn_mean: float
    dcn_scale: float
    config: TapConfig = field(default_factory=TapConfig)
    training_mse: float = float("nan")

    def standardize(self, x: np.ndarray, dcn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            ((x - self.feature_mean) / self.feature_scale).astype(np.float32),
            ((np.asarray(dcn, dtype=np.float64) - self.dcn_mean) / self.dcn_scale).astype(np.float32),
        )

    def predict_pairs(self, x: np.ndarray, dcn: np.ndarray) -> np.ndarray:
        """Predicted accuracies for raw pair features [n, 2, N_FEATURES]"""
        x, dcn = self.standardize(x, dcn)
        h = _lstm_numpy(x, self.weights, "lstm1", return_sequences=True)
        h = _lstm_numpy(h, self.weights, "lstm2", return_sequences=False)
        z = np.concatenate([h, dcn[:, None]], axis=-1)
        return expit(z @ self.weights["head/kernel"] + self.weights["head/bias"])[:, 0]


def _lstm_numpy(xs: np.ndarray, weights: dict[str, np.ndarray], prefix: str, return_sequences: bool) -> np.ndarray:
    w_x, w_h, bias = weights[f"{prefix}/w_x"], weights[f"{prefix}/w_h"], weights[f"{prefix}/bias"]
    hidden = w_h.shape[0]
    h = np.zeros((xs.shape[0], hidden), dtype=np.float32)
    c = np.zeros_like(h)
    outputs = []
    for t in range(xs.shape[1]):
        gates = xs[:, t, :] @ w_x + h @ w_h + bias
        i, f = expit(gates[:, :hidden]), expit(gates[:, hidden : 2 * hidden])
        g, o = np.tanh(gates[:, 2 * hidden : 3 * hidden]), expit(gates[:, 3 * hidden :])
        c = f * c + i * g
        h = o * np.tanh(c)
        outputs.append(h)
    return np.stack(outputs, axis=1) if return_sequences else h


def _initial_weights(config: TapConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    first, second = config.hidden
    weights = {}
    for prefix, (size_in, hidden) in (("lstm1", (N_FEATURES, first)), ("lstm2", (first, second))):
        params = LSTMParams.create(size_in, hidden, rng)
        weights.update({f"{prefix}/{name}": t.data for name, t in params.tensors().items()})
    weights["head/kernel"] = he_normal((second + 1, 1), second + 1, rng)
    weights["head/bias"] = np.zeros(1, dtype=np.float32)
    return weights


def _forward(params: dict[str, Tensor], x: np.ndarray, dcn: np.ndarray) -> Tensor:
    def lstm(prefix):
        return LSTMParams(params[f"{prefix}/w_x"], params[f"{prefix}/w_h"], params[f"{prefix}/bias"])

    h = lstm_forward(Tensor(x), lstm("lstm1"), return_sequences=True)
    h = lstm_forward(h, lstm("lstm2"))
    z = ops.concat([h, Tensor(dcn[:, None])], axis=-1)
    return ops.sigmoid(ops.dense(z, params["head/kernel"], params["head/bias"]))


def fit_tap(pairs: TrainingPairs, config: Optional[TapConfig] = None) -> TapModel:
    """
    :raises EmptyTrainingSetError: without any pair
    """
    config = config or TapConfig()
    if len(pairs) == 0:
        raise EmptyTrainingSetError("The accuracy predictor needs at least one experiment")
    rng = np.random.default_rng(config.seed)
    features = StandardScaler().fit(pairs.x.reshape(-1, N_FEATURES))
    dcn_scaler = StandardScaler().fit(pairs.dcn[:, None])
    tap = TapModel(
        weights=_initial_weights(config, rng),
        feature_mean=features.mean_,
        feature_scale=features.scale_,
        dcn_mean=float(dcn_scaler.mean_[0]),
        dcn_scale=float(dcn_scaler.scale_[0]),
        config=config,
    )
    x, dcn = tap.standardize(pairs.x, pairs.dcn)
    target = pairs.target.astype(np.float32)[:, None]
    params = {name: parameter(array) for name, array in tap.weights.items()}
    optimizer = make_optimizer(
        OptimizerConfig(kind=OptimizerKind.RMSPROP, learning_rate=config.learning_rate, batch_size=config.batch_size)
    )
    loss_value = float("nan")
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss = ops.mse(_forward(params, x[idx], dcn[idx]), target[idx])
            grads = backward(loss)
            optimizer.step(params, {name: grads[t] for name, t in params.items() if t in grads})
            total += float(loss.data) * len(idx)
        loss_value = total / len(order)
        if epoch % 50 == 0:
            logger.debug(f"Predictor epoch {epoch}: mse {loss_value:.6f}")
    tap.weights = {name: t.data.copy() for name, t in params.items()}
    tap.training_mse = float(np.mean((tap.predict_pairs(pairs.x, pairs.dcn) - pairs.target) ** 2))
    logger.info(f"Trained the accuracy predictor on {len(pairs)} pairs, mse {tap.training_mse:.6f}")
    return tap


def train_tap(records: Sequence[ExperimentRecord], config: Optional[TapConfig] = None) -> TapModel:
    config = config or TapConfig()
    return fit_tap(training_pairs(records, config.embedding_dim), config)


def predict_rollouts(
    tap: TapModel, chains: Sequence[ChainArchitecture], meta: GraphMeta, dcn: float
) -> list[list[float]]:
    """Accuracies A_0 .. A_n of every chain, each predicted from the previous one

    Chains advance together, one layer per predictor call.
    """
    encodings: list[ChainEncoding] = [encode_chain(chain, meta, tap.config.embedding_dim) for chain in chains]
    rollouts = [[initial_accuracy(meta.n_classes)] for _ in chains]
    step = 0
    while True:
        active = [k for k, encoding in enumerate(encodings) if len(encoding) > step]
        if not active:
            break
        x = np.stack([encodings[k].pair(step, rollouts[k][-1]) for k in active])
        predicted = tap.predict_pairs(x, np.full(len(active), dcn))
        for k, value in zip(active, predicted):
            rollouts[k].append(float(value))
        step += 1
    return rollouts


def predict_accuracy(tap: TapModel, chain: ChainArchitecture, meta: GraphMeta, dcn: float) -> float:
    """Predicted accuracy of the complete chain, without any training"""
    return predict_rollouts(tap, [chain], meta, dcn)[0][-1]


@dataclass
class TapTensor:
    shape: list[int]
    values: list[float]


@dataclass
class TapArchive:
    version: int
    config: TapConfig
    tensors: dict[str, TapTensor]
    feature_mean: list[float]
    feature_scale: list[float]
    dcn_mean: float
    dcn_scale: float
    training_mse: float


def save_tap(tap: TapModel, path: Union[str, Path]) -> None:
    archive = TapArchive(
        version=TAP_FORMAT_VERSION,
        config=tap.config,
        tensors={name: TapTensor(list(array.shape), array.reshape(-1).tolist()) for name, array in tap.weights.items()},
        feature_mean=tap.feature_mean.tolist(),
        feature_scale=tap.feature_scale.tolist(),
        dcn_mean=tap.dcn_mean,
        dcn_scale=tap.dcn_scale,
        training_mse=tap.training_mse,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_dto(archive)), encoding="utf-8")


def load_tap(path: Union[str, Path]) -> TapModel:
    """
    :raises TapFormatError: on unreadable files or unknown versions
    """
    try:
        archive: TapArchive = from_dto(TapArchive, json.loads(Path(path).read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError, AssertionError) as e:
        raise TapFormatError(f"{path} is not a stored accuracy predictor: {e}") from e
    if archive.version != TAP_FORMAT_VERSION:
        raise TapFormatError(f"{path}: unsupported predictor version {archive.version}")
    return TapModel(
        weights={
            name: np.asarray(tensor.values, dtype=np.float32).reshape(tensor.shape) for name, tensor in archive.tensors.items()
        },
        feature_mean=np.asarray(archive.feature_mean),
        feature_scale=np.asarray(archive.feature_scale),
        dcn_mean=archive.dcn_mean,
        dcn_scale=archive.dcn_scale,
        config=archive.config,
        training_mse=archive.training_mse,
    )
