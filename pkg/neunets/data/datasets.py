from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.model_selection import train_test_split

from neunets.arch.graph import GraphMeta
from neunets.errors import NeunetsError

logger = logging.getLogger(__name__)

HOLDOUT_FRACTION = 0.1


class DatasetError(NeunetsError):
    pass


@dataclass
class RawImages:
    """Undecoded source pixels, uint8 [n, h, w, c]"""

    images: np.ndarray
    labels: np.ndarray
    classes: list[str]

    def validate(self) -> None:
        if self.images.ndim != 4:
            raise DatasetError(f"Images must be [n, h, w, c], got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DatasetError(f"{len(self.images)} images but {len(self.labels)} labels")
        _check_labels(self.labels, len(self.classes))


@dataclass
class RawText:
    texts: list[str]
    labels: np.ndarray
    classes: list[str]

    def validate(self) -> None:
        if len(self.texts) != len(self.labels):
            raise DatasetError(f"{len(self.texts)} texts but {len(self.labels)} labels")
        _check_labels(self.labels, len(self.classes))


def _check_labels(labels: np.ndarray, n_classes: int) -> None:
    if len(labels) and (labels.min() < 0 or labels.max() >= n_classes):
        raise DatasetError(f"Labels must lie in [0, {n_classes}), got [{labels.min()}, {labels.max()}]")


@dataclass
class Split:
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, indices) -> Split:
        return Split(self.x[indices], self.y[indices])


@dataclass
class Dataset:
    """Model-ready splits of one classification task

    The holdout split is carved from the training data and drives fitness and early stopping;
    the test split is only touched by final reporting.
    """

    domain: str
    classes: list[str]
    train: Split
    holdout: Split
    test: Optional[Split] = None
    nonnegative: bool = False
    vocab_size: int = 0

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return tuple(self.train.x.shape[1:])

    @property
    def n_examples(self) -> int:
        return len(self.train) + len(self.holdout) + (len(self.test) if self.test is not None else 0)

    def meta(self) -> GraphMeta:
        return GraphMeta(
            input_shape=self.input_shape,
            n_classes=self.n_classes,
            nonnegative_inputs=self.nonnegative,
            domain=self.domain,
            vocab_size=self.vocab_size,
        )


@dataclass
class Standardization:
    """Per-feature statistics of the training split"""

    mean: np.ndarray
    std: np.ndarray

    STD_FLOOR = 1e-6

    @classmethod
    def fit(cls, x: np.ndarray) -> Standardization:
        x = x.astype(np.float64)
        return cls(mean=x.mean(axis=0), std=np.maximum(x.std(axis=0), cls.STD_FLOOR))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return ((x.astype(np.float64) - self.mean) / self.std).astype(np.float32)


@dataclass
class ImageDataset(Dataset):
    resolution: int = 0
    standardization: Optional[Standardization] = None


@dataclass
class TextDataset(Dataset):
    vocabulary: list[str] = field(default_factory=list)
    max_len: int = 0
    # rows aligned to token ids, the last row belongs to the unknown token
    embeddings: Optional[np.ndarray] = None


def split_holdout(x: np.ndarray, y: np.ndarray, fraction: float = HOLDOUT_FRACTION, seed: int = 0) -> tuple[Split, Split]:
    """Stratified train/holdout split; falls back to a plain random split for tiny classes"""
    if not 0 < fraction < 1:
        raise DatasetError(f"Holdout fraction must be in (0, 1), got {fraction}")
    if len(y) < 2:
        raise DatasetError(f"Need at least two examples to carve out a holdout split, got {len(y)}")
    indices = np.arange(len(y))
    try:
        train_idx, holdout_idx = train_test_split(indices, test_size=fraction, random_state=seed, stratify=y)
    except ValueError:
        logger.warning("Classes too small for a stratified holdout, using a random split")
        train_idx, holdout_idx = train_test_split(indices, test_size=fraction, random_state=seed)
    train_idx, holdout_idx = np.sort(train_idx), np.sort(holdout_idx)
    return Split(x[train_idx], y[train_idx]), Split(x[holdout_idx], y[holdout_idx])
