from __future__ import annotations

import datetime
import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from neunets.codec import to_dto

logger = logging.getLogger(__name__)


@dataclass
class EpochEvent:
    job_id: str
    epoch: int
    train_loss: float
    train_accuracy: float
    holdout_accuracy: float
    seconds: float
    timestamp: datetime.datetime


class EventLog:
    """Append-only JSON-lines file of dataclass records; without a path events are only logged"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record) -> None:
        logger.debug(f"{type(record).__name__}: {record}")
        if self.path is None:
            return
        line = json.dumps(to_dto(record), sort_keys=True)
        with self._lock, open(self.path, "a", encoding="utf-8") as f:
            f.write(line + "\n")

    def read(self) -> list[dict]:
        if self.path is None or not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]


def now() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)
