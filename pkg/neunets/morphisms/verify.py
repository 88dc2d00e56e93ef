from dataclasses import dataclass

import numpy as np

from neunets.arch.graph import GraphMeta, NetworkGraph, parameter_tensors, run_graph
from neunets.morphisms.errors import MetadataMismatchError


@dataclass
class PreservationReport:
    max_deviation: float
    trials: int
    tolerance: float
    passed: bool


def random_inputs(meta: GraphMeta, count: int, rng: np.random.Generator) -> np.ndarray:
    """Inputs covering the admissible domain of a network"""
    shape = (count,) + tuple(meta.input_shape)
    if meta.domain == "text":
        return rng.integers(0, max(meta.vocab_size, 1), size=shape).astype(np.float64)
    if meta.nonnegative_inputs:
        return rng.uniform(0.0, 1.0, size=shape)
    return rng.standard_normal(shape)


def logits64(graph: NetworkGraph, x: np.ndarray) -> np.ndarray:
    params = parameter_tensors(graph, trainable=(), dtype=np.float64)
    target = graph.logits_id
    return run_graph(graph, np.asarray(x, dtype=np.float64), params=params, until=target)[target].data


def verify_function_preserving(
    before: NetworkGraph, after: NetworkGraph, trials: int = 100, tol: float = 1e-5, seed: int = 0
) -> PreservationReport:
    """Largest absolute logit difference of two networks over `trials` random inputs

    :raises MetadataMismatchError: if the networks disagree on input shape, classes or domain
    """
    if before.meta != after.meta:
        raise MetadataMismatchError(f"{before.meta} != {after.meta}")
    x = random_inputs(before.meta, trials, np.random.default_rng(seed))
    deviation = float(np.max(np.abs(logits64(before, x) - logits64(after, x)))) if trials else 0.0
    return PreservationReport(max_deviation=deviation, trials=trials, tolerance=tol, passed=deviation <= tol)
