from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

DEFAULT_STATE_DIR = ".neunets"


@dataclass(frozen=True)
class Settings:
    """Where pipelines, the lifelong database and the dataset groups live

    `NEUNETS_STATE_DIR`, `NEUNETS_LDE_PATH` and `NEUNETS_GROUP_STORE` override the defaults,
    which all sit inside the state directory.
    """

    state_dir: Path
    lde_path: Path
    group_store: Path

    @property
    def pipelines_dir(self) -> Path:
        return self.state_dir / "pipelines"


def load_settings(state_dir: Optional[Union[str, Path]] = None, environ: Optional[Mapping[str, str]] = None) -> Settings:
    environ = os.environ if environ is None else environ
    if state_dir is None:
        state_dir = environ.get("NEUNETS_STATE_DIR") or DEFAULT_STATE_DIR
    state_dir = Path(state_dir)
    return Settings(
        state_dir=state_dir,
        lde_path=Path(environ.get("NEUNETS_LDE_PATH") or state_dir / "lde.jsonl"),
        group_store=Path(environ.get("NEUNETS_GROUP_STORE") or state_dir / "groups.json"),
    )
