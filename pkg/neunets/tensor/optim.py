from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from neunets.errors import NeunetsError
from neunets.tensor.autograd import Tensor


class OptimizerConfigError(NeunetsError):
    pass


class OptimizerKind(enum.Enum):
    SGD_MOMENTUM = "sgd_momentum"
    RMSPROP = "rmsprop"


@dataclass
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.SGD_MOMENTUM
    learning_rate: float = 0.01
    momentum: float = 0.9
    decay: float = 0.9
    batch_size: int = 64
    weight_decay: float = 0.0
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise OptimizerConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise OptimizerConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0 <= self.momentum < 1 or not 0 <= self.decay < 1:
            raise OptimizerConfigError("momentum and decay must lie in [0, 1)")
        if self.weight_decay < 0:
            raise OptimizerConfigError("weight decay must be >= 0")


class AbstractOptimizer:
    """Updates named parameters in place; per-parameter slots are keyed by name"""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.slots: dict[str, np.ndarray] = {}

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> None:
        """Applies `grads` and clears the accumulated `.grad` of every parameter"""
        for name, param in params.items():
            grad = grads.get(name)
            param.grad = None
            if grad is None:
                continue
            param.data = self.update(name, param.data, grad.astype(param.data.dtype, copy=False))

    def update(self, name: str, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError(repr(self))


class SGDMomentum(AbstractOptimizer):
    def update(self, name, value, grad):
        config = self.config
        if config.weight_decay:
            grad = grad + config.weight_decay * value
        velocity = self.slots.get(name)
        velocity = -config.learning_rate * grad if velocity is None else config.momentum * velocity - config.learning_rate * grad
        self.slots[name] = velocity
        return value + velocity


class RMSProp(AbstractOptimizer):
    def update(self, name, value, grad):
        config = self.config
        if config.weight_decay:
            grad = grad + config.weight_decay * value
        mean_square = self.slots.get(name, np.zeros_like(value))
        mean_square = config.decay * mean_square + (1 - config.decay) * grad**2
        self.slots[name] = mean_square
        return value - config.learning_rate * grad / (np.sqrt(mean_square) + config.epsilon)


optimizer_registry = {
    OptimizerKind.SGD_MOMENTUM: SGDMomentum,
    OptimizerKind.RMSPROP: RMSProp,
}


def make_optimizer(config: OptimizerConfig) -> AbstractOptimizer:
    return optimizer_registry[config.kind](config)
