import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from neunets.data.text import Vocabulary
from neunets.errors import NeunetsError

logger = logging.getLogger(__name__)

INIT_LIMIT = 0.05


class EmbeddingFormatError(NeunetsError):
    pass


def load_embeddings(
    path: Union[str, Path], vocabulary: Vocabulary, seed: int = 0, dim: Optional[int] = None
) -> np.ndarray:
    """Embedding matrix with row i holding the vector of token id i

    Words absent from the file (and the unknown token) keep seeded uniform(-0.05, 0.05) rows.

    :raises EmbeddingFormatError: on lines of different dimension, or a dimension other than `dim`
    """
    found: dict[int, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.rstrip().split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise EmbeddingFormatError(f"{path}:{line_no} has {len(values)} values, expected {dim}")
            token = vocabulary.id(word)
            if token != vocabulary.unk_id:
                try:
                    found[token] = np.array(values, dtype=np.float32)
                except ValueError:
                    raise EmbeddingFormatError(f"{path}:{line_no} holds a non-numeric value")
    if dim is None:
        raise EmbeddingFormatError(f"{path} holds no vectors")
    matrix = np.random.default_rng(seed).uniform(-INIT_LIMIT, INIT_LIMIT, size=(vocabulary.size, dim)).astype(np.float32)
    for token, vector in found.items():
        matrix[token] = vector
    logger.info(f"Loaded {len(found)} of {len(vocabulary.words)} word vectors of dimension {dim}")
    return matrix
