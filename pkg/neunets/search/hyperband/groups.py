"""Dataset groups that let new datasets reuse the configurations found for similar ones"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from sklearn.preprocessing import StandardScaler

from neunets.codec import from_dto, to_dto
from neunets.data.datasets import Dataset
from neunets.errors import NeunetsError
from neunets.search.hyperband.space import HyperbandConfig
from neunets.storage import atomic_write

logger = logging.getLogger(__name__)

GROUP_RADIUS = 1.0
BEST_PER_GROUP = 3
META_FEATURES = ("log_examples", "log_classes", "log_resolution", "log_channels", "class_entropy", "dcn")
# lower bounds of the per-feature scales; a spread below them doesn't separate datasets
FEATURE_SCALES = (1.0, 1.0, 1.0, 1.0, 0.25, 0.1)


class GroupStoreError(NeunetsError):
    pass


def meta_features(dataset: Dataset, dcn: float = 0.0) -> list[float]:
    """Size, class count, resolution, channels, class balance and characterization of a dataset"""
    shape = dataset.input_shape
    if dataset.domain == "text":
        resolution, channels = shape[-1], 1
    else:
        resolution, channels = shape[0] * shape[1], shape[2] if len(shape) == 3 else 1
    counts = np.bincount(dataset.train.y, minlength=dataset.n_classes).astype(np.float64)
    p = counts[counts > 0] / counts.sum()
    entropy = float(-(p * np.log(p)).sum() / math.log(dataset.n_classes)) if dataset.n_classes > 1 else 0.0
    return [
        math.log10(max(dataset.n_examples, 1)),
        math.log2(dataset.n_classes),
        math.log2(resolution),
        math.log2(channels),
        entropy,
        float(dcn),
    ]


def feature_scales(groups: list[DatasetGroup]) -> np.ndarray:
    """Standard deviation of every meta-feature over all stored datasets, floored at FEATURE_SCALES"""
    members = [features for group in groups for features in group.member_features]
    if len(members) < 2:
        return np.asarray(FEATURE_SCALES)
    scaler = StandardScaler().fit(np.asarray(members, dtype=np.float64))
    return np.maximum(np.sqrt(scaler.var_), FEATURE_SCALES)


def feature_distance(a: list[float], b: list[float], scales: Optional[np.ndarray] = None) -> float:
    scaled = (np.asarray(a) - np.asarray(b)) / (np.asarray(FEATURE_SCALES) if scales is None else scales)
    return float(np.sqrt((scaled**2).sum()))


@dataclass
class ScoredConfig:
    config: HyperbandConfig
    accuracy: float


@dataclass
class DatasetGroup:
    id: int
    centroid: list[float]
    members: list[str] = field(default_factory=list)
    member_features: list[list[float]] = field(default_factory=list)
    best: list[ScoredConfig] = field(default_factory=list)

    def add_member(self, dataset_id: str, features: list[float]) -> None:
        if dataset_id in self.members:
            return
        self.members.append(dataset_id)
        self.member_features.append(list(features))
        self.centroid = np.mean(np.asarray(self.member_features), axis=0).tolist()

    def record(self, config: HyperbandConfig, accuracy: float, keep: int = BEST_PER_GROUP) -> None:
        self.best.append(ScoredConfig(config, accuracy))
        self.best = sorted(self.best, key=lambda scored: -scored.accuracy)[:keep]


def assign_group(features: list[float], groups: list[DatasetGroup], radius: float = GROUP_RADIUS) -> tuple[DatasetGroup, bool]:
    """The group with the nearest centroid within `radius`, else a new one

    Distances are measured in units of the spread of the stored datasets. Returns the group
    and whether it was created. Equal distances go to the lower group id.
    """
    scales = feature_scales(groups)
    candidates = [(feature_distance(features, group.centroid, scales), group.id, group) for group in groups]
    candidates = [c for c in candidates if c[0] <= radius]
    if candidates:
        return min(candidates, key=lambda c: (c[0], c[1]))[2], False
    next_id = max((group.id for group in groups), default=-1) + 1
    return DatasetGroup(id=next_id, centroid=list(features)), True


@dataclass
class GroupStoreFile:
    groups: list[DatasetGroup] = field(default_factory=list)


class GroupStore:
    """Dataset groups persisted as one JSON file, replaced atomically on every save"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.groups: list[DatasetGroup] = []
        if self.path is not None and self.path.exists():
            try:
                self.groups = from_dto(GroupStoreFile, json.loads(self.path.read_text(encoding="utf-8"))).groups
            except (ValueError, KeyError, TypeError, AssertionError) as e:
                raise GroupStoreError(f"{self.path} is not a group store: {e}") from e

    def assign(self, dataset_id: str, features: list[float], radius: float = GROUP_RADIUS) -> tuple[DatasetGroup, bool]:
        group, created = assign_group(features, self.groups, radius)
        if created:
            self.groups.append(group)
            logger.info(f"Dataset {dataset_id} opens group {group.id}")
        else:
            logger.info(f"Dataset {dataset_id} joins group {group.id} with {len(group.best)} stored configurations")
        group.add_member(dataset_id, features)
        return group, created

    def save(self) -> None:
        if self.path is None:
            return
        atomic_write(self.path, json.dumps(to_dto(GroupStoreFile(self.groups))))
