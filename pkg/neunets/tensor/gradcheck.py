"""Central finite-difference verification of `backward`"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from neunets.tensor import ops
from neunets.tensor.autograd import Tensor, backward


@dataclass
class GradCheckReport:
    checked: int
    passed: int
    max_relative_error: float

    @property
    def pass_fraction(self) -> float:
        return self.passed / self.checked if self.checked else 1.0


def projected_loss(output: Tensor, seed: int = 0) -> Tensor:
    """Reduces an arbitrary output to a scalar with fixed random weights"""
    weights = np.random.default_rng(seed).normal(size=output.shape).astype(output.data.dtype)
    return ops.reduce_sum(ops.mul(output, weights))


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-3,
    tolerance: float = 1e-3,
    samples_per_param: int = 20,
    seed: int = 0,
) -> GradCheckReport:
    """Compares backprop against central differences on sampled coordinates of every param

    `loss_fn` must rebuild the forward pass from the current contents of `params`.
    """
    rng = np.random.default_rng(seed)
    for param in params:
        param.grad = None
    analytic = backward(loss_fn())

    checked = passed = 0
    worst = 0.0
    for param in params:
        grad = analytic.get(param, np.zeros_like(param.data))
        flat_size = param.data.size
        coords = rng.choice(flat_size, size=min(samples_per_param, flat_size), replace=False)
        for flat_index in coords:
            index = np.unravel_index(flat_index, param.shape)
            original = param.data[index]
            param.data[index] = original + eps
            plus = float(loss_fn().data)
            param.data[index] = original - eps
            minus = float(loss_fn().data)
            param.data[index] = original
            numeric = (plus - minus) / (2 * eps)
            exact = float(grad[index])
            error = abs(numeric - exact) / max(abs(numeric), abs(exact), 1e-7)
            if abs(numeric - exact) < 1e-8:
                error = 0.0
            worst = max(worst, error)
            checked += 1
            passed += error <= tolerance
    return GradCheckReport(checked=checked, passed=passed, max_relative_error=worst)
