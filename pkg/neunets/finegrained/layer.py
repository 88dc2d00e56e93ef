"""The two trainable shapes of the fine-grained layer: the base classifier and the grown layer

Kernels follow the fully connected convention, [inputs, outputs]. Every model keeps its
weights as numpy arrays and offers two forward passes: an autograd one for training and a
float64 numpy one for the exact checks and least-squares restoration.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

import numpy as np

from neunets.tensor import ops
from neunets.tensor.autograd import DTYPE, Tensor, as_tensor, parameter

ACTIVATIONS = ("relu", "linear")


def _activate(activation: str, x):
    if activation == "linear":
        return x
    if isinstance(x, Tensor):
        return ops.relu(x)
    return np.maximum(x, 0.0)


class AbstractFineLayer:
    def tensors(self) -> dict[str, Tensor]:
        """Fresh trainable tensors over the current weights"""
        raise NotImplementedError(repr(self))

    def forward(self, params: dict[str, Tensor], x: np.ndarray) -> Tensor:
        raise NotImplementedError(repr(self))

    def outputs(self, x: np.ndarray) -> np.ndarray:
        """Pre-softmax outputs in float64"""
        raise NotImplementedError(repr(self))

    def load(self, params: dict[str, Tensor]) -> None:
        raise NotImplementedError(repr(self))

    def param_count(self) -> int:
        raise NotImplementedError(repr(self))

    def copy(self):
        return copy.deepcopy(self)


@dataclass
class BaseLayer(AbstractFineLayer):
    """y = W x + B over the selected input neurons"""

    kernel: np.ndarray
    bias: np.ndarray

    def tensors(self):
        return {"kernel": parameter(self.kernel), "bias": parameter(self.bias)}

    def forward(self, params, x):
        return ops.dense(as_tensor(x), params["kernel"], params["bias"])

    def outputs(self, x):
        return x.astype(np.float64) @ self.kernel.astype(np.float64) + self.bias.astype(np.float64)

    def load(self, params):
        self.kernel = params["kernel"].data.astype(DTYPE)
        self.bias = params["bias"].data.astype(DTYPE)

    def param_count(self):
        return self.kernel.size + self.bias.size


@dataclass
class WeightBuckets:
    """Hidden neurons tied to k shared weight vectors of length N

    Hidden neuron h reads the selected inputs `inputs[h]` (ascending) and weighs them with
    `shared[assignment[h]]`.
    """

    assignment: np.ndarray
    inputs: np.ndarray
    shared: np.ndarray

    @property
    def k(self) -> int:
        return len(self.shared)

    def members(self, bucket: int) -> list[int]:
        return [int(h) for h in np.flatnonzero(self.assignment == bucket)]


@dataclass
class GrownLayer(AbstractFineLayer):
    """z = Act(W' x + B'), y = W'' z + B''

    Before merging, W' is dense with a connectivity mask; after merging it is given by the
    weight buckets and `hidden_kernel`/`mask` only record the layout the buckets came from.
    """

    hidden_kernel: np.ndarray
    hidden_bias: np.ndarray
    output_kernel: np.ndarray
    output_bias: np.ndarray
    mask: np.ndarray
    # W' right after growing; the reference for the change-magnitude pruning metric
    initial_kernel: np.ndarray
    activation: str = "relu"
    buckets: Optional[WeightBuckets] = None

    @property
    def hidden_size(self) -> int:
        return self.hidden_bias.shape[0]

    def fan_in(self) -> np.ndarray:
        """Inbound connections per hidden neuron"""
        return self.mask.sum(axis=0)

    def effective_kernel(self) -> np.ndarray:
        """Dense W' with pruned connections as zeros and tied weights written out"""
        if self.buckets is None:
            return (self.hidden_kernel * self.mask).astype(DTYPE)
        kernel = np.zeros_like(self.hidden_kernel, dtype=DTYPE)
        for h in range(self.hidden_size):
            kernel[self.buckets.inputs[h], h] = self.buckets.shared[self.buckets.assignment[h]]
        return kernel

    def tensors(self):
        params = {
            "hidden_bias": parameter(self.hidden_bias),
            "output_kernel": parameter(self.output_kernel),
            "output_bias": parameter(self.output_bias),
        }
        if self.buckets is None:
            params["hidden_kernel"] = parameter(self.hidden_kernel)
        else:
            params["shared"] = parameter(self.buckets.shared)
        return params

    def hidden(self, params: dict[str, Tensor], x: np.ndarray) -> Tensor:
        if self.buckets is None:
            pre = ops.dense(as_tensor(x), ops.mul(params["hidden_kernel"], self.mask.astype(DTYPE)), params["hidden_bias"])
        else:
            gathered = x[:, self.buckets.inputs]
            weights = ops.getitem(params["shared"], self.buckets.assignment)
            pre = ops.add(ops.reduce_sum(ops.mul(weights, gathered), axis=-1), params["hidden_bias"])
        return _activate(self.activation, pre)

    def forward(self, params, x):
        return ops.dense(self.hidden(params, x), params["output_kernel"], params["output_bias"])

    def hidden_outputs(self, x: np.ndarray) -> np.ndarray:
        kernel = self.effective_kernel().astype(np.float64)
        return _activate(self.activation, x.astype(np.float64) @ kernel + self.hidden_bias.astype(np.float64))

    def outputs(self, x):
        return self.hidden_outputs(x) @ self.output_kernel.astype(np.float64) + self.output_bias.astype(np.float64)

    def load(self, params):
        self.hidden_bias = params["hidden_bias"].data.astype(DTYPE)
        self.output_kernel = params["output_kernel"].data.astype(DTYPE)
        self.output_bias = params["output_bias"].data.astype(DTYPE)
        if self.buckets is None:
            # pruned connections stay exactly zero
            self.hidden_kernel = (params["hidden_kernel"].data * self.mask).astype(DTYPE)
        else:
            self.buckets.shared = params["shared"].data.astype(DTYPE)

    def param_count(self):
        connections = self.buckets.shared.size if self.buckets is not None else int(self.mask.sum())
        return connections + self.hidden_bias.size + self.output_kernel.size + self.output_bias.size
