from typing import Sequence, Union

import numpy as np

from neunets.tensor.autograd import DTYPE, Tensor, parameter


def he_normal(shape: Sequence[int], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=tuple(shape)).astype(DTYPE)


def he_normal_init(shape: Sequence[int], fan_in: int, seed: Union[int, np.random.Generator]) -> Tensor:
    """Trainable tensor drawn from Normal(0, sqrt(2 / fan_in))"""
    return parameter(he_normal(shape, fan_in, np.random.default_rng(seed)))


def uniform(shape: Sequence[int], limit: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-limit, limit, size=tuple(shape)).astype(DTYPE)
