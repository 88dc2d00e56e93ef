"""Differentiable operations on `Tensor`

Image tensors are NHWC. Convolution weights are [k1, k2, in, out], depthwise weights
[k1, k2, in]. Unbatched [h, w, c] inputs are accepted by the public conv entry points.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from neunets.tensor.autograd import Function, ShapeError, Tensor, as_tensor

Operand = Union[Tensor, np.ndarray, float, int]
PADDING_MODES = ("same", "valid")


def _pair(value: Union[int, Sequence[int]]) -> tuple[int, int]:
    if isinstance(value, int):
        return value, value
    first, second = value
    return int(first), int(second)


def _const(value: Operand, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=like.data.dtype)


class Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(grad, b.shape)


class Sub(Function):
    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(-grad, b.shape)


class Mul(Function):
    def forward(self, a, b):
        return a * b

    def backward(self, grad):
        a, b = self.inputs
        return self.unbroadcast(grad * b.data, a.shape), self.unbroadcast(grad * a.data, b.shape)


class MatMul(Function):
    def forward(self, a, b):
        if a.shape[-1] != b.shape[0]:
            raise ShapeError(f"Cannot multiply {a.shape} by {b.shape}")
        return a @ b

    def backward(self, grad):
        a, b = self.inputs
        return grad @ b.data.T, a.data.T @ grad


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.axis = axis
        self.keepdims = keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        (x,) = self.inputs
        if self.axis is not None and not self.keepdims:
            axes = self.axis if isinstance(self.axis, tuple) else (self.axis,)
            for axis in sorted(a % x.ndim for a in axes):
                grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, x.shape).copy(),)


class Reshape(Function):
    def forward(self, x, shape):
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.inputs[0].shape),)


class Transpose(Function):
    def forward(self, x, axes):
        self.axes = axes
        return np.transpose(x, axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class GetItem(Function):
    def forward(self, x, index):
        self.index = index
        return np.array(x[index])

    def backward(self, grad):
        (x,) = self.inputs
        full = np.zeros_like(x.data)
        np.add.at(full, self.index, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays, axis=-1):
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, bounds, axis=self.axis))


class ReLU(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, x):
        self.out = expit(x).astype(x.dtype)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1 - self.out),)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1 - self.out**2),)


class Softmax(Function):
    def forward(self, x):
        shifted = np.exp(x - x.max(axis=-1, keepdims=True))
        self.out = shifted / shifted.sum(axis=-1, keepdims=True)
        return self.out

    def backward(self, grad):
        dot = (grad * self.out).sum(axis=-1, keepdims=True)
        return (self.out * (grad - dot),)


class SoftmaxCrossEntropy(Function):
    """Mean cross-entropy of integer labels against softmax(logits)"""

    def forward(self, logits, labels):
        self.labels = np.asarray(labels, dtype=np.int64)
        shifted = logits - logits.max(axis=-1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        log_probs = shifted - log_norm
        self.probs = np.exp(log_probs)
        picked = log_probs[np.arange(len(self.labels)), self.labels]
        return np.asarray(-picked.mean(), dtype=logits.dtype)

    def backward(self, grad):
        n = len(self.labels)
        delta = self.probs.copy()
        delta[np.arange(n), self.labels] -= 1
        return (delta * (grad / n),)


class MeanSquaredError(Function):
    def forward(self, pred, target):
        self.diff = pred - np.asarray(target, dtype=pred.dtype).reshape(pred.shape)
        return np.asarray((self.diff**2).mean(), dtype=pred.dtype)

    def backward(self, grad):
        return (grad * 2 * self.diff / self.diff.size,)


def conv_output_size(extent: int, kernel: int, stride: int, padding: str) -> int:
    if padding == "same":
        return math.ceil(extent / stride)
    if padding == "valid":
        if extent < kernel:
            raise ShapeError(f"Kernel {kernel} larger than input extent {extent} with valid padding")
        return (extent - kernel) // stride + 1
    raise ShapeError(f"Unknown padding mode {padding!r}")


def _padding_amounts(extent: int, kernel: int, stride: int, padding: str) -> tuple[int, int]:
    if padding == "valid":
        return 0, 0
    out = conv_output_size(extent, kernel, stride, padding)
    total = max((out - 1) * stride + kernel - extent, 0)
    return total // 2, total - total // 2


class _Windowed(Function):
    """Shared sliding-window bookkeeping of convolutions and pools"""

    def windows(self, x: np.ndarray, kernel, stride, padding, fill=0.0) -> np.ndarray:
        k1, k2 = kernel
        s1, s2 = stride
        self.kernel, self.stride = kernel, stride
        n, h, w, c = x.shape
        self.out_hw = (conv_output_size(h, k1, s1, padding), conv_output_size(w, k2, s2, padding))
        (top, bottom), (left, right) = _padding_amounts(h, k1, s1, padding), _padding_amounts(w, k2, s2, padding)
        self.pads = (top, left)
        padded = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)), constant_values=fill)
        self.padded_shape = padded.shape
        # [n, ho, wo, c, k1, k2]
        win = sliding_window_view(padded, (k1, k2), axis=(1, 2))[:, ::s1, ::s2]
        return win[:, : self.out_hw[0], : self.out_hw[1]]

    def scatter(self, per_offset_grad) -> np.ndarray:
        """Accumulate per kernel offset gradients [n, ho, wo, c] back onto the unpadded input"""
        k1, k2 = self.kernel
        s1, s2 = self.stride
        ho, wo = self.out_hw
        full = np.zeros(self.padded_shape, dtype=self.inputs[0].data.dtype)
        for i in range(k1):
            for j in range(k2):
                full[:, i : i + s1 * ho : s1, j : j + s2 * wo : s2, :] += per_offset_grad(i, j)
        n, h, w, c = self.inputs[0].shape
        top, left = self.pads
        return full[:, top : top + h, left : left + w, :]


class Conv2D(_Windowed):
    def forward(self, x, weights, stride=(1, 1), padding="same"):
        k1, k2, cin, cout = weights.shape
        if x.ndim != 4 or x.shape[-1] != cin:
            raise ShapeError(f"Input {x.shape} does not match kernel in-channels {cin}")
        win = self.windows(x, (k1, k2), stride, padding)
        n, ho, wo = win.shape[:3]
        self.cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * ho * wo, k1 * k2 * cin)
        out = self.cols @ weights.reshape(k1 * k2 * cin, cout)
        return out.reshape(n, ho, wo, cout)

    def backward(self, grad):
        x, weights = self.inputs
        k1, k2, cin, cout = weights.shape
        flat = grad.reshape(-1, cout)
        dw = (self.cols.T @ flat).reshape(weights.shape)
        dcols = (flat @ weights.data.reshape(k1 * k2 * cin, cout).T).reshape(grad.shape[:3] + (k1, k2, cin))
        return self.scatter(lambda i, j: dcols[:, :, :, i, j, :]), dw


class DepthwiseConv2D(_Windowed):
    def forward(self, x, weights, stride=(1, 1), padding="same"):
        k1, k2, cin = weights.shape
        if x.ndim != 4 or x.shape[-1] != cin:
            raise ShapeError(f"Input {x.shape} does not match depthwise channels {cin}")
        self.win = self.windows(x, (k1, k2), stride, padding)
        return np.einsum("nhwcij,ijc->nhwc", self.win, weights)

    def backward(self, grad):
        x, weights = self.inputs
        dw = np.einsum("nhwcij,nhwc->ijc", self.win, grad)
        return self.scatter(lambda i, j: grad * weights.data[i, j]), dw


class MaxPool2D(_Windowed):
    def forward(self, x, kernel=(2, 2), stride=None):
        stride = stride or kernel
        win = self.windows(x, kernel, stride, "valid")
        n, ho, wo, c, k1, k2 = win.shape
        flat = win.reshape(n, ho, wo, c, k1 * k2)
        self.argmax = flat.argmax(axis=-1)
        return np.take_along_axis(flat, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        k2 = self.kernel[1]
        rows, cols = np.divmod(self.argmax, k2)
        return (self.scatter(lambda i, j: grad * ((rows == i) & (cols == j))),)


class AvgPool2D(_Windowed):
    def forward(self, x, kernel=(2, 2), stride=None):
        stride = stride or kernel
        return self.windows(x, kernel, stride, "valid").mean(axis=(-2, -1))

    def backward(self, grad):
        share = grad / (self.kernel[0] * self.kernel[1])
        return (self.scatter(lambda i, j: share),)


class BatchNormTrain(Function):
    """Normalizes with the batch statistics over every axis but the last"""

    def forward(self, x, gamma, beta, eps=1e-5):
        axes = tuple(range(x.ndim - 1))
        self.batch_mean = x.mean(axis=axes)
        self.batch_var = x.var(axis=axes)
        self.inv_std = 1.0 / np.sqrt(self.batch_var + eps)
        self.xhat = (x - self.batch_mean) * self.inv_std
        self.count = x.size // x.shape[-1]
        return gamma * self.xhat + beta

    def backward(self, grad):
        x, gamma, beta = self.inputs
        axes = tuple(range(x.ndim - 1))
        dbeta = grad.sum(axis=axes)
        dgamma = (grad * self.xhat).sum(axis=axes)
        dxhat = grad * gamma.data
        dx = (self.inv_std / self.count) * (
            self.count * dxhat - dxhat.sum(axis=axes) - self.xhat * (dxhat * self.xhat).sum(axis=axes)
        )
        return dx, dgamma, dbeta


def add(a: Operand, b: Operand) -> Tensor:
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        a = as_tensor(a)
    if isinstance(a, Tensor):
        return Add.apply(a, _const(b, a))
    return Add.apply(_const(a, b), b)


def sub(a: Operand, b: Operand) -> Tensor:
    if isinstance(a, Tensor):
        return Sub.apply(a, _const(b, a))
    return Sub.apply(_const(a, b), b)


def mul(a: Operand, b: Operand) -> Tensor:
    if isinstance(a, Tensor):
        return Mul.apply(a, _const(b, a))
    return Mul.apply(_const(a, b), b)


def matmul(a: Tensor, b: Operand) -> Tensor:
    return MatMul.apply(a, _const(b, a))


def reduce_sum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def reduce_mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    return Transpose.apply(x, axes=tuple(axes))


def getitem(x: Tensor, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


def softmax(x: Tensor) -> Tensor:
    return Softmax.apply(x)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    return SoftmaxCrossEntropy.apply(logits, labels=labels)


def mse(pred: Tensor, target: np.ndarray) -> Tensor:
    return MeanSquaredError.apply(pred, target=target)


def dense(x: Tensor, weights: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, weights)
    return out if bias is None else add(out, bias)


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 4:
        raise ShapeError(f"Expected an [h, w, c] or [n, h, w, c] input, got {x.shape}")
    return x, False


def conv_forward(
    x: Tensor, weights: Tensor, stride: Union[int, Sequence[int]] = 1, padding: str = "same", bias: Optional[Tensor] = None
) -> Tensor:
    """Cross-correlation of `x` with [k1, k2, in, out] `weights`"""
    x, squeeze = _batched(as_tensor(x))
    weights = as_tensor(weights)
    if weights.ndim != 4:
        raise ShapeError(f"Convolution weights must be [k1, k2, in, out], got {weights.shape}")
    out = Conv2D.apply(x, weights, stride=_pair(stride), padding=padding)
    if bias is not None:
        out = add(out, bias)
    return reshape(out, out.shape[1:]) if squeeze else out


def depthwise_conv_forward(
    x: Tensor, weights: Tensor, stride: Union[int, Sequence[int]] = 1, padding: str = "same"
) -> Tensor:
    x, squeeze = _batched(as_tensor(x))
    weights = as_tensor(weights)
    if weights.ndim != 3:
        raise ShapeError(f"Depthwise weights must be [k1, k2, in], got {weights.shape}")
    out = DepthwiseConv2D.apply(x, weights, stride=_pair(stride), padding=padding)
    return reshape(out, out.shape[1:]) if squeeze else out


def separable_conv_forward(
    x: Tensor,
    depthwise: Tensor,
    pointwise: Tensor,
    stride: Union[int, Sequence[int]] = 1,
    padding: str = "same",
    bias: Optional[Tensor] = None,
) -> Tensor:
    """Per-channel spatial convolution followed by a 1x1 convolution"""
    depthwise, pointwise = as_tensor(depthwise), as_tensor(pointwise)
    if pointwise.ndim != 4 or pointwise.shape[:2] != (1, 1) or pointwise.shape[2] != depthwise.shape[-1]:
        raise ShapeError(f"Pointwise weights {pointwise.shape} do not match depthwise {depthwise.shape}")
    spatial = depthwise_conv_forward(x, depthwise, stride=stride, padding=padding)
    return conv_forward(spatial, pointwise, stride=1, padding="valid", bias=bias)


def max_pool(x: Tensor, kernel=(2, 2), stride=None) -> Tensor:
    return MaxPool2D.apply(x, kernel=_pair(kernel), stride=_pair(stride) if stride else None)


def avg_pool(x: Tensor, kernel=(2, 2), stride=None) -> Tensor:
    return AvgPool2D.apply(x, kernel=_pair(kernel), stride=_pair(stride) if stride else None)


def global_avg_pool(x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"Global pooling expects [n, h, w, c], got {x.shape}")
    return reduce_mean(x, axis=(1, 2))


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Returns the normalized tensor and the batch mean and variance"""
    out = BatchNormTrain.apply(x, gamma, beta, eps=eps)
    func = out.creator
    if func is None:
        axes = tuple(range(x.ndim - 1))
        return out, x.data.mean(axis=axes), x.data.var(axis=axes)
    return out, func.batch_mean, func.batch_var


def batch_norm_inference(
    x: Tensor, gamma: Tensor, beta: Tensor, moving_mean: np.ndarray, moving_var: np.ndarray, eps: float = 1e-5
) -> Tensor:
    scale = mul(gamma, (1.0 / np.sqrt(moving_var + eps)).astype(x.data.dtype))
    shift = sub(beta, mul(scale, moving_mean.astype(x.data.dtype)))
    return add(mul(x, scale), shift)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; the caller decides whether the network is training"""
    if rate <= 0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return mul(x, keep)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    return getitem(table, np.asarray(ids, dtype=np.int64))
