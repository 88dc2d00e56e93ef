from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph, build_graph
from neunets.arch.layers import LayerKind, LayerSpec
from neunets.data.datasets import Dataset, DatasetError
from neunets.search.tapas.lde import DatasetCharacterization, LifelongDatabase, dataset_fingerprint
from neunets.tensor.optim import OptimizerConfig
from neunets.training.trainer import TrainJob, train

logger = logging.getLogger(__name__)


@dataclass
class ProbeNetConfig:
    """A small fixed network whose peak holdout accuracy characterizes a dataset's difficulty"""

    filters: tuple[int, ...] = (16, 32, 64)
    epochs: int = 10
    # larger training splits are subsampled
    max_examples: int = 5000
    embedding_dim: int = 32
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(learning_rate=0.01, batch_size=64))


def probe_network(meta: GraphMeta, config: Optional[ProbeNetConfig] = None, rng: Union[int, np.random.Generator] = 0) -> NetworkGraph:
    """Convolution, batch normalization, ReLU and pooling blocks, then a dense classifier"""
    config = config or ProbeNetConfig()
    layers = [LayerSpec(id=0, kind=LayerKind.INPUT, shape=tuple(meta.input_shape))]
    if meta.domain == "text":
        layers.append(LayerSpec(id=1, kind=LayerKind.EMBEDDING, inputs=(0,), channels=config.embedding_dim, vocab=meta.vocab_size))
        height, width = 1, meta.input_shape[-1]
    else:
        height, width = meta.input_shape[0], meta.input_shape[1]

    def add(kind, **hyperparameters):
        layers.append(LayerSpec(id=len(layers), kind=kind, inputs=(len(layers) - 1,), **hyperparameters))

    kernel = (1, 3) if meta.domain == "text" else (3, 3)
    for filters in config.filters:
        add(LayerKind.CONVOLUTION, kernel=kernel, channels=filters)
        add(LayerKind.BATCH_NORM)
        add(LayerKind.RELU)
        window = (1 if height < 2 else 2, 1 if width < 2 else 2)
        if window != (1, 1):
            add(LayerKind.MAX_POOL, kernel=window, stride=window)
            height, width = height // window[0], width // window[1]
    add(LayerKind.GLOBAL_AVG_POOL)
    add(LayerKind.FULLY_CONNECTED, channels=meta.n_classes)
    add(LayerKind.SOFTMAX)
    return build_graph(layers, meta, rng)


def compute_dcn(
    dataset: Dataset,
    config: Optional[ProbeNetConfig] = None,
    lde: Optional[LifelongDatabase] = None,
    seed: int = 0,
) -> float:
    """Peak holdout accuracy of the probe network over a fixed number of epochs

    With an LDE the number is cached per dataset fingerprint and a second call trains nothing.

    :raises DatasetError: for datasets with fewer than two classes
    """
    if dataset.n_classes < 2:
        raise DatasetError(f"Characterization needs at least two classes, got {dataset.n_classes}")
    config = config or ProbeNetConfig()
    dataset_id = dataset_fingerprint(dataset)
    if lde is not None:
        cached = lde.cached_dcn(dataset_id)
        if cached is not None:
            logger.debug(f"Characterization of {dataset_id} read from the LDE: {cached:.4f}")
            return cached

    rng = np.random.default_rng(seed)
    data = dataset
    if len(dataset.train) > config.max_examples:
        keep = np.sort(rng.choice(len(dataset.train), size=config.max_examples, replace=False))
        data = dataclasses.replace(dataset, train=dataset.train.subset(keep))
    job = TrainJob(
        probe_network(dataset.meta(), config, rng),
        data,
        config.optimizer,
        epochs=config.epochs,
        patience=config.epochs,
        seed=seed,
        job_id="probenet",
    )
    dcn = train(job).holdout_accuracy
    logger.info(f"Dataset {dataset_id} characterization number {dcn:.4f}")
    if lde is not None:
        lde.characterize(DatasetCharacterization(dataset_id, dcn, dataset.n_classes, dataset.n_examples))
    return dcn
