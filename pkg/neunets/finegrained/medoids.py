"""k-medoids clustering of weight vectors by the shape of their distribution"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import pairwise_distances

logger = logging.getLogger(__name__)

# above this many candidate medoid sets the swap heuristic takes over
EXHAUSTIVE_LIMIT = 5000


@dataclass
class Clustering:
    # ascending vector indices
    medoids: list[int]
    # cluster position (into `medoids`) of every vector
    assignment: np.ndarray
    cost: float
    exhaustive: bool


def normalize_rows(vectors: np.ndarray) -> np.ndarray:
    """Unit L2 norm per row; all-zero rows stay zero"""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def _assign(distances: np.ndarray, medoids: list[int]) -> tuple[np.ndarray, float]:
    # argmin keeps the first medoid on ties; a medoid always belongs to its own cluster
    to_medoids = distances[:, medoids]
    assignment = to_medoids.argmin(axis=1)
    assignment[medoids] = np.arange(len(medoids))
    return assignment, float(to_medoids.min(axis=1).sum())


def _exhaustive(distances: np.ndarray, k: int) -> tuple[list[int], float]:
    best: tuple[float, list[int]] = (math.inf, [])
    for candidate in itertools.combinations(range(len(distances)), k):
        cost = float(distances[:, candidate].min(axis=1).sum())
        if cost < best[0]:
            best = (cost, list(candidate))
    return best[1], best[0]


def _pam(distances: np.ndarray, k: int) -> tuple[list[int], float]:
    """Greedy build followed by best-improvement swaps"""
    n = len(distances)
    medoids = [int(distances.sum(axis=1).argmin())]
    while len(medoids) < k:
        nearest = distances[:, medoids].min(axis=1)
        gains = [
            np.maximum(nearest - distances[:, c], 0).sum() if c not in medoids else -1.0
            for c in range(n)
        ]
        medoids.append(int(np.argmax(gains)))
    _, cost = _assign(distances, medoids)
    while True:
        best_swap = None
        for position in range(k):
            for candidate in range(n):
                if candidate in medoids:
                    continue
                trial = medoids[:position] + [candidate] + medoids[position + 1 :]
                _, trial_cost = _assign(distances, trial)
                if trial_cost < cost - 1e-12 and (best_swap is None or trial_cost < best_swap[0]):
                    best_swap = (trial_cost, trial)
        if best_swap is None:
            break
        cost, medoids = best_swap
    return sorted(medoids), cost


def k_medoids(vectors: np.ndarray, k: int, exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> Clustering:
    """Partitions the rows of `vectors` around k medoids under Euclidean distance

    Every medoid set is tried when there are at most `exhaustive_limit` of them.
    """
    n = len(vectors)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    distances = pairwise_distances(np.asarray(vectors, dtype=np.float64), metric="euclidean")
    exhaustive = math.comb(n, k) <= exhaustive_limit
    medoids, _ = _exhaustive(distances, k) if exhaustive else _pam(distances, k)
    assignment, cost = _assign(distances, medoids)
    logger.debug(f"{k}-medoids over {n} vectors ({'exhaustive' if exhaustive else 'swap search'}): cost {cost:.6f}")
    return Clustering(medoids=medoids, assignment=assignment, cost=cost, exhaustive=exhaustive)
