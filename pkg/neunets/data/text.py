from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from neunets.data.datasets import DatasetError, RawText, Split, TextDataset, split_holdout

logger = logging.getLogger(__name__)

STOP_WORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been before being below
    between both but by can could did do does doing down during each few for from further had has have
    having he her here hers herself him himself his how i if in into is it its itself just me more most
    my myself no nor not now of off on once only or other our ours ourselves out over own same she should
    so some such than that the their theirs them themselves then there these they this those through to
    too under until up very was we were what when where which while who whom why will with would you your
    yours yourself yourselves also may might must shall us let s t don isn aren wasn weren doesn didn
    hasn haven hadn won wouldn shouldn couldn ll re ve d m o y
    """.split()
)

TOKEN_PATTERN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return TOKEN_PATTERN.findall(text.lower())


@dataclass
class Vocabulary:
    """Top-K words by frequency; id K is the unknown token, which also pads short sentences"""

    words: list[str]

    def __post_init__(self):
        self._ids = {word: i for i, word in enumerate(self.words)}

    @property
    def unk_id(self) -> int:
        return len(self.words)

    @property
    def size(self) -> int:
        return len(self.words) + 1

    def id(self, word: str) -> int:
        return self._ids.get(word, self.unk_id)

    def encode(self, text: str, max_len: int) -> np.ndarray:
        ids = [self.id(token) for token in tokenize(text)][:max_len]
        return np.array(ids + [self.unk_id] * (max_len - len(ids)), dtype=np.int64)


def build_vocabulary(corpus: Iterable[str], k: int, stop_words: frozenset = STOP_WORDS) -> Vocabulary:
    """Most frequent `k` words, most common first; ties go to the lexicographically smaller word"""
    if k < 1:
        raise DatasetError(f"Vocabulary size must be at least 1, got {k}")
    counts = Counter(token for text in corpus for token in tokenize(text) if token not in stop_words)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Vocabulary([word for word, _ in ranked[:k]])


def vectorize_text(
    corpus: list[str],
    k: int,
    max_len: int,
    stop_words: frozenset = STOP_WORDS,
    vocabulary: Optional[Vocabulary] = None,
) -> tuple[np.ndarray, Vocabulary]:
    """Token id matrix [n, max_len] of a corpus, truncated or padded with the unknown token"""
    if not corpus:
        raise DatasetError("Empty corpus")
    if max_len < 1:
        raise DatasetError(f"Sentence length must be at least 1, got {max_len}")
    vocabulary = vocabulary or build_vocabulary(corpus, k, stop_words)
    return np.stack([vocabulary.encode(text, max_len) for text in corpus]), vocabulary


def preprocess_text(
    raw: RawText,
    k: int,
    max_len: int,
    embeddings: Optional[np.ndarray] = None,
    raw_test: Optional[RawText] = None,
    holdout_fraction: float = 0.1,
    seed: int = 0,
) -> TextDataset:
    """Vectorize with a vocabulary built from the training texts only"""
    raw.validate()
    ids, vocabulary = vectorize_text(raw.texts, k, max_len)
    logger.info(f"Vectorized {len(raw.texts)} texts, {len(vocabulary.words)} words, length {max_len}")
    train, holdout = split_holdout(ids, raw.labels.astype(np.int64), holdout_fraction, seed)
    test = None
    if raw_test is not None:
        raw_test.validate()
        test = Split(vectorize_text(raw_test.texts, k, max_len, vocabulary=vocabulary)[0], raw_test.labels.astype(np.int64))
    if embeddings is not None and embeddings.shape[0] != vocabulary.size:
        raise DatasetError(f"Embedding matrix has {embeddings.shape[0]} rows for {vocabulary.size} token ids")
    return TextDataset(
        domain="text",
        classes=list(raw.classes),
        train=train,
        holdout=holdout,
        test=test,
        vocab_size=vocabulary.size,
        vocabulary=vocabulary.words,
        max_len=max_len,
        embeddings=embeddings,
    )
