from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from neunets.tensor import ops
from neunets.tensor.autograd import ShapeError, Tensor, as_tensor, parameter
from neunets.tensor.init import he_normal


@dataclass
class LSTMParams:
    """Gate weights stacked along the last axis in input, forget, candidate, output order"""

    w_x: Tensor  # [in, 4h]
    w_h: Tensor  # [h, 4h]
    bias: Tensor  # [4h]

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_x.shape[0]

    @classmethod
    def create(cls, input_size: int, hidden_size: int, rng: Union[int, np.random.Generator]) -> LSTMParams:
        rng = np.random.default_rng(rng)
        return cls(
            w_x=parameter(he_normal((input_size, 4 * hidden_size), input_size, rng)),
            w_h=parameter(he_normal((hidden_size, 4 * hidden_size), hidden_size, rng)),
            bias=parameter(np.zeros(4 * hidden_size)),
        )

    def tensors(self) -> dict[str, Tensor]:
        return {"w_x": self.w_x, "w_h": self.w_h, "bias": self.bias}


def lstm_step(x_t, h_prev, c_prev, params: LSTMParams) -> tuple[Tensor, Tensor]:
    """One cell update on a [batch, in] input"""
    x_t, h_prev, c_prev = as_tensor(x_t), as_tensor(h_prev), as_tensor(c_prev)
    hidden = params.hidden_size
    if params.w_x.shape[1] != 4 * hidden or params.bias.shape != (4 * hidden,):
        raise ShapeError(f"Gate weights inconsistent with hidden size {hidden}")
    if x_t.shape[-1] != params.input_size:
        raise ShapeError(f"Input width {x_t.shape[-1]} != declared {params.input_size}")
    if h_prev.shape[-1] != hidden or c_prev.shape[-1] != hidden:
        raise ShapeError(f"State widths {h_prev.shape}, {c_prev.shape} != hidden size {hidden}")

    gates = x_t @ params.w_x + h_prev @ params.w_h + params.bias
    i = ops.sigmoid(gates[:, :hidden])
    f = ops.sigmoid(gates[:, hidden : 2 * hidden])
    g = ops.tanh(gates[:, 2 * hidden : 3 * hidden])
    o = ops.sigmoid(gates[:, 3 * hidden :])
    c_t = f * c_prev + i * g
    h_t = o * ops.tanh(c_t)
    return h_t, c_t


def lstm_forward(
    xs: Tensor, params: LSTMParams, h0: Optional[Tensor] = None, c0: Optional[Tensor] = None, return_sequences: bool = False
) -> Tensor:
    """Runs the cell over a [batch, time, in] sequence from a zero state by default"""
    xs = as_tensor(xs)
    if xs.ndim != 3:
        raise ShapeError(f"Expected [batch, time, features], got {xs.shape}")
    batch, steps = xs.shape[:2]
    zeros = np.zeros((batch, params.hidden_size), dtype=xs.data.dtype)
    h = h0 if h0 is not None else Tensor(zeros, dtype=zeros.dtype)
    c = c0 if c0 is not None else Tensor(zeros, dtype=zeros.dtype)
    outputs = []
    for t in range(steps):
        h, c = lstm_step(xs[:, t, :], h, c, params)
        outputs.append(ops.reshape(h, (batch, 1, params.hidden_size)))
    if return_sequences:
        return ops.concat(outputs, axis=1)
    return h
