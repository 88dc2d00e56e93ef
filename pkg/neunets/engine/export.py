"""The deliverable of a pipeline: a model file, its metrics and what it needs to read new data"""
from __future__ import annotations

import datetime
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import jinja2
import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix

from neunets.arch.costs import total_costs
from neunets.arch.graph import NetworkGraph, predict
from neunets.arch.serialization import load_model, serialize
from neunets.codec import from_dto, to_dto
from neunets.data.datasets import Dataset, DatasetError, ImageDataset, RawImages, Split, Standardization, TextDataset
from neunets.data.formats import load_raw
from neunets.data.images import resize_images
from neunets.data.text import Vocabulary
from neunets.storage import atomic_write
from neunets.engine.state import PipelineState
from neunets.training.events import now
from neunets.training.trainer import evaluate_fitness

logger = logging.getLogger(__name__)

MODEL_FILE = "model.nnsg"
METRICS_FILE = "metrics.json"
PREPROCESSING_FILE = "preprocessing.json"
README_FILE = "README.txt"

README_TEMPLATE = """Model exported by pipeline {{ metrics.pipeline }} ({{ metrics.stage }}).

  algorithm          {{ metrics.algorithm }}{% if metrics.finegrained %} + fine-grained refinement{% endif %}
  candidate          {{ metrics.candidate }} ({{ metrics.label }})
  holdout accuracy   {{ "%.4f"|format(metrics.holdout_accuracy) }}
{%- if metrics.test_accuracy is not none %}
  test accuracy      {{ "%.4f"|format(metrics.test_accuracy) }}
{%- endif %}
  parameters         {{ metrics.params }}
  inference FLOPs    {{ metrics.inference_flops }}
  cycles             {{ metrics.cycles }}
  training seconds   {{ "%.1f"|format(metrics.consumed_seconds) }}

Classes: {{ preprocessing.classes|join(", ") }}
{% if preprocessing.domain == "image" -%}
Inputs are {{ preprocessing.resolution }}x{{ preprocessing.resolution }} images, standardized with the statistics in {{ preprocessing_file }}.
{%- else -%}
Inputs are {{ preprocessing.max_length }} token ids over a vocabulary of {{ preprocessing.vocabulary|length }} words, stored in {{ preprocessing_file }}.
{%- endif %}
Evaluate with: neunets eval --model {{ model_file }} --dataset PATH
"""


@dataclass
class Preprocessing:
    domain: str
    classes: list[str]
    resolution: int = 0
    # per-feature standardization of image inputs, flattened
    shape: list[int] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    std: list[float] = field(default_factory=list)
    vocabulary: list[str] = field(default_factory=list)
    max_length: int = 0

    @classmethod
    def of(cls, data: Dataset) -> Preprocessing:
        if isinstance(data, ImageDataset) and data.standardization is not None:
            mean = np.asarray(data.standardization.mean)
            return cls(
                domain=data.domain,
                classes=list(data.classes),
                resolution=data.resolution,
                shape=list(mean.shape),
                mean=mean.reshape(-1).tolist(),
                std=np.asarray(data.standardization.std).reshape(-1).tolist(),
            )
        if isinstance(data, TextDataset):
            return cls(domain=data.domain, classes=list(data.classes), vocabulary=list(data.vocabulary), max_length=data.max_len)
        return cls(domain=data.domain, classes=list(data.classes))

    def apply(self, raw) -> np.ndarray:
        if self.domain == "image":
            if not self.resolution:
                raise DatasetError("The export carries no image preprocessing")
            standardization = Standardization(
                mean=np.asarray(self.mean).reshape(self.shape), std=np.asarray(self.std).reshape(self.shape)
            )
            return standardization.apply(resize_images(raw.images, self.resolution))
        vocabulary = Vocabulary(self.vocabulary)
        return np.stack([vocabulary.encode(text, self.max_length) for text in raw.texts])


@dataclass
class ExportMetrics:
    pipeline: str
    algorithm: str
    stage: str
    candidate: int
    label: str
    holdout_accuracy: float
    params: int
    inference_flops: int
    cycles: int
    consumed_seconds: float
    test_accuracy: Optional[float] = None
    finegrained: bool = False
    exported: datetime.datetime = field(default_factory=now)


def export_model(state: PipelineState, graph: NetworkGraph, data: Dataset, directory: Union[str, Path]) -> ExportMetrics:
    """Write the model, its metrics, its preprocessing and a short README to `directory`"""
    directory = Path(directory)
    best = state.best_candidate
    costs = total_costs(graph)
    metrics = ExportMetrics(
        pipeline=state.id,
        algorithm=state.config.algorithm,
        stage=state.stage.value,
        candidate=best.id,
        label=best.label,
        holdout_accuracy=evaluate_fitness(graph, data.holdout),
        params=costs.params,
        inference_flops=costs.inference_flops,
        cycles=state.cycle,
        consumed_seconds=state.consumed_seconds,
        test_accuracy=evaluate_fitness(graph, data.test) if data.test is not None else None,
        finegrained=state.finegrained,
    )
    preprocessing = Preprocessing.of(data)
    atomic_write(directory / MODEL_FILE, serialize(graph))
    atomic_write(directory / METRICS_FILE, json.dumps(to_dto(metrics), indent=2, sort_keys=True))
    atomic_write(directory / PREPROCESSING_FILE, json.dumps(to_dto(preprocessing)))
    readme = jinja2.Template(README_TEMPLATE).render(
        metrics=metrics, preprocessing=preprocessing, preprocessing_file=PREPROCESSING_FILE, model_file=MODEL_FILE
    )
    atomic_write(directory / README_FILE, readme)
    logger.info(f"Exported candidate {best.id} of {state.id} to {directory} (holdout {metrics.holdout_accuracy:.4f})")
    return metrics


def read_metrics(directory: Union[str, Path]) -> ExportMetrics:
    return from_dto(ExportMetrics, json.loads((Path(directory) / METRICS_FILE).read_text(encoding="utf-8")))


@dataclass
class Evaluation:
    accuracy: float
    n_examples: int
    classes: list[str]
    # rows are true classes, columns predictions
    confusion: list[list[int]]


def evaluate_export(model_path: Union[str, Path], dataset_path: Union[str, Path]) -> Evaluation:
    """Accuracy of an exported model on a labeled dataset in any of the supported layouts

    Labels are matched to the model's classes by name.

    :raises DatasetError: if the dataset has classes the model does not know
    """
    model_path = Path(model_path)
    graph = load_model(model_path)
    preprocessing: Preprocessing = from_dto(
        Preprocessing, json.loads((model_path.parent / PREPROCESSING_FILE).read_text(encoding="utf-8"))
    )
    raw, _ = load_raw(dataset_path)
    raw.validate()
    if (preprocessing.domain == "image") != isinstance(raw, RawImages):
        raise DatasetError(f"The model reads {preprocessing.domain} data, {dataset_path} holds something else")
    unknown = sorted(set(raw.classes) - set(preprocessing.classes))
    if unknown:
        raise DatasetError(f"{dataset_path} has classes the model does not know: {', '.join(unknown)}")
    index = np.array([preprocessing.classes.index(name) for name in raw.classes], dtype=np.int64)
    split = Split(preprocessing.apply(raw), index[np.asarray(raw.labels, dtype=np.int64)])
    predicted = predict(graph, split.x).argmax(axis=-1)
    accuracy = float(accuracy_score(split.y, predicted)) if len(split) else 0.0
    confusion = confusion_matrix(split.y, predicted, labels=list(range(len(preprocessing.classes))))
    return Evaluation(accuracy=accuracy, n_examples=len(split), classes=preprocessing.classes, confusion=confusion.tolist())
