"""The lifelong database of experiments

An append-only JSON-lines file. Every line holds either a trained chain with the accuracies of
all of its prefixes, or the characterization number of a dataset.
"""
from __future__ import annotations

import datetime
import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from neunets.arch.graph import GraphMeta
from neunets.codec import from_dto, to_dto
from neunets.data.datasets import Dataset
from neunets.errors import NeunetsError
from neunets.search.tapas.space import ChainArchitecture
from neunets.training.events import now

logger = logging.getLogger(__name__)

DCN_THRESHOLD = 0.05
# float noise on stored characterization numbers must not flip a boundary match
SELECT_SLACK = 1e-12


class LdeFormatError(NeunetsError):
    pass


@dataclass
class ExperimentRecord:
    chain: ChainArchitecture
    dataset_id: str
    dcn: float
    n_classes: int
    # accuracy after each chain element, A_1 .. A_n
    accuracies: list[float]
    input_shape: tuple[int, ...] = ()
    hyperparameters: dict[str, float] = field(default_factory=dict)
    domain: str = "image"
    vocab_size: int = 0
    created: Optional[datetime.datetime] = None
    id: str = ""

    def __post_init__(self):
        if not self.id:
            self.id = record_id(self)

    def meta(self) -> GraphMeta:
        return GraphMeta(
            input_shape=tuple(self.input_shape), n_classes=self.n_classes, domain=self.domain, vocab_size=self.vocab_size
        )

    def validate(self) -> None:
        if len(self.accuracies) != len(self.chain):
            raise LdeFormatError(f"Record {self.id}: {len(self.accuracies)} accuracies for {len(self.chain)} elements")
        if any(not 0 <= a <= 1 for a in self.accuracies):
            raise LdeFormatError(f"Record {self.id}: accuracies outside [0, 1]")
        if not 0 <= self.dcn <= 1:
            raise LdeFormatError(f"Record {self.id}: characterization number {self.dcn} outside [0, 1]")


@dataclass
class DatasetCharacterization:
    dataset_id: str
    dcn: float
    n_classes: int
    n_examples: int
    created: Optional[datetime.datetime] = None


@dataclass
class LdeLine:
    experiment: Optional[ExperimentRecord] = None
    dataset: Optional[DatasetCharacterization] = None


def record_id(record: ExperimentRecord) -> str:
    """Content hash of everything but the timestamp"""
    content = {
        "chain": to_dto(record.chain),
        "dataset_id": record.dataset_id,
        "dcn": round(float(record.dcn), 9),
        "n_classes": int(record.n_classes),
        "input_shape": list(record.input_shape),
        "accuracies": [round(float(a), 9) for a in record.accuracies],
        "hyperparameters": {k: float(v) for k, v in record.hyperparameters.items()},
        "domain": record.domain,
        "vocab_size": int(record.vocab_size),
    }
    return hashlib.sha1(json.dumps(content, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def dataset_fingerprint(dataset: Dataset) -> str:
    digest = hashlib.sha1()
    for split in (dataset.train, dataset.holdout):
        digest.update(np.ascontiguousarray(split.x).tobytes())
        digest.update(np.ascontiguousarray(split.y).astype(np.int64).tobytes())
    digest.update(",".join(dataset.classes).encode("utf-8"))
    return digest.hexdigest()[:16]


def lde_select(records: Iterable[ExperimentRecord], query_dcn: float, tau: float = DCN_THRESHOLD) -> list[ExperimentRecord]:
    """Records of datasets whose characterization number lies within `tau` of the query, inclusive"""
    return [record for record in records if abs(record.dcn - query_dcn) <= tau + SELECT_SLACK]


class LifelongDatabase:
    """In-memory view of an LDE file; appends go to the file immediately

    Without a path the database lives in memory only.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.records: list[ExperimentRecord] = []
        self.datasets: dict[str, DatasetCharacterization] = {}
        self._ids: set[str] = set()
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in read_lines(self.path):
                self._remember(line)

    def __len__(self) -> int:
        return len(self.records)

    def _remember(self, line: LdeLine) -> bool:
        if line.experiment is not None:
            if line.experiment.id in self._ids:
                return False
            self._ids.add(line.experiment.id)
            self.records.append(line.experiment)
        if line.dataset is not None:
            self.datasets[line.dataset.dataset_id] = line.dataset
        return True

    def _write(self, line: LdeLine) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(to_dto(line), sort_keys=True) + "\n")

    def append(self, record: ExperimentRecord) -> bool:
        """Adds a record unless one with the same id is known; returns whether it was added"""
        record.validate()
        if record.created is None:
            record.created = now()
        line = LdeLine(experiment=record)
        with self._lock:
            if not self._remember(line):
                return False
            self._write(line)
        return True

    def characterize(self, characterization: DatasetCharacterization) -> None:
        if characterization.created is None:
            characterization.created = now()
        line = LdeLine(dataset=characterization)
        with self._lock:
            self._remember(line)
            self._write(line)

    def cached_dcn(self, dataset_id: str) -> Optional[float]:
        known = self.datasets.get(dataset_id)
        return known.dcn if known is not None else None

    def select(self, query_dcn: float, tau: float = DCN_THRESHOLD) -> list[ExperimentRecord]:
        return lde_select(self.records, query_dcn, tau)

    def merge(self, other: LifelongDatabase) -> int:
        """Appends the other database's unknown records and characterizations; returns the number of new records"""
        added = sum(self.append(record) for record in other.records)
        for characterization in other.datasets.values():
            if characterization.dataset_id not in self.datasets:
                self.characterize(characterization)
        logger.info(f"Merged {added} new records into {self.path or 'memory'}")
        return added

    def export(self, path: Union[str, Path]) -> None:
        target = LifelongDatabase(path)
        target.merge(self)


def read_lines(path: Union[str, Path]) -> list[LdeLine]:
    """
    :raises LdeFormatError: on lines that are not LDE entries
    """
    lines = []
    with open(path, encoding="utf-8") as f:
        for number, text in enumerate(f, start=1):
            if not text.strip():
                continue
            try:
                line = from_dto(LdeLine, json.loads(text))
            except (ValueError, KeyError, TypeError, AssertionError) as e:
                raise LdeFormatError(f"{path}:{number}: not an LDE entry ({e})") from e
            if line.experiment is not None:
                line.experiment.validate()
            lines.append(line)
    return lines
