from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from neunets.errors import NeunetsError
from neunets.tensor import ops
from neunets.tensor.autograd import ShapeError, Tensor
from neunets.tensor.init import he_normal, uniform
from neunets.tensor.lstm import LSTMParams, lstm_forward

Shape = tuple[int, ...]

DEFAULT_DROPOUT_RATE = 0.5
BN_MOMENTUM = 0.9
BN_EPSILON = 1e-5


class LayerKind(enum.Enum):
    INPUT = "input"
    CONVOLUTION = "convolution"
    SEPARABLE_CONVOLUTION = "separable_convolution"
    FULLY_CONNECTED = "fully_connected"
    MAX_POOL = "max_pool"
    AVG_POOL = "avg_pool"
    GLOBAL_AVG_POOL = "global_avg_pool"
    BATCH_NORM = "batch_norm"
    DROPOUT = "dropout"
    RELU = "relu"
    SOFTMAX = "softmax"
    ADD = "add"
    CONCAT = "concat"
    EMBEDDING = "embedding"
    LSTM = "lstm"


class UnknownLayerError(NeunetsError):
    pass


class UnsupportedLayerError(NeunetsError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """One node of a network DAG

    `channels` is the output width: filters, units, embedding size or LSTM hidden size.
    `cell` and `local` place a layer inside a neuro-cell instance; `local` is shared by the
    corresponding layers of all instances.
    """

    id: int
    kind: LayerKind
    inputs: tuple[int, ...] = ()
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    padding: str = "same"
    channels: int = 0
    rate: float = DEFAULT_DROPOUT_RATE
    activation: Optional[str] = None
    cell: Optional[int] = None
    local: Optional[int] = None
    vocab: int = 0
    shape: tuple[int, ...] = ()


@dataclass
class ForwardContext:
    training: bool = False
    rng: Optional[np.random.Generator] = None
    # batch mean and variance per BatchNorm layer, filled in training mode
    batch_stats: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def _spatial(spec: LayerSpec, shape: Shape) -> tuple[int, int, int]:
    if len(shape) != 3:
        raise ShapeError(f"{spec.kind.value} layer {spec.id} needs an [h, w, c] input, got {shape}")
    return shape  # type: ignore


def _size(shape: Sequence[int]) -> int:
    return int(np.prod(shape)) if len(shape) else 1


def _activate(spec: LayerSpec, x: Tensor) -> Tensor:
    if spec.activation is None or spec.activation == "linear":
        return x
    if spec.activation == "relu":
        return ops.relu(x)
    raise UnsupportedLayerError(f"Unknown activation {spec.activation!r} on layer {spec.id}")


class AbstractLayer:
    kind: LayerKind
    arity: Optional[int] = 1  # None: two or more inputs

    @classmethod
    def output_shape(cls, spec: LayerSpec, input_shapes: list[Shape]) -> Shape:
        raise NotImplementedError(repr(cls))

    @classmethod
    def weight_shapes(cls, spec: LayerSpec, input_shapes: list[Shape]) -> dict[str, Shape]:
        return {}

    @classmethod
    def init_weights(cls, spec: LayerSpec, input_shapes: list[Shape], rng: np.random.Generator) -> dict[str, np.ndarray]:
        return {}

    @classmethod
    def init_buffers(cls, spec: LayerSpec, input_shapes: list[Shape]) -> dict[str, np.ndarray]:
        return {}

    @classmethod
    def forward(
        cls, spec: LayerSpec, inputs: list[Tensor], params: dict[str, Tensor], buffers: dict[str, np.ndarray], ctx: ForwardContext
    ) -> Tensor:
        raise NotImplementedError(repr(cls))

    @classmethod
    def flops(cls, spec: LayerSpec, input_shapes: list[Shape], output_shape: Shape) -> int:
        """Multiply-adds count as two operations"""
        return 0

    @classmethod
    def param_count(cls, spec: LayerSpec, input_shapes: list[Shape]) -> int:
        return sum(_size(shape) for shape in cls.weight_shapes(spec, input_shapes).values())


class InputLayer(AbstractLayer):
    kind = LayerKind.INPUT
    arity = 0

    @classmethod
    def output_shape(cls, spec, input_shapes):
        return tuple(spec.shape)

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return inputs[0]


class Convolution(AbstractLayer):
    kind = LayerKind.CONVOLUTION

    @classmethod
    def output_shape(cls, spec, input_shapes):
        h, w, _ = _spatial(spec, input_shapes[0])
        (k1, k2), (s1, s2) = spec.kernel, spec.stride
        return (
            ops.conv_output_size(h, k1, s1, spec.padding),
            ops.conv_output_size(w, k2, s2, spec.padding),
            spec.channels,
        )

    @classmethod
    def weight_shapes(cls, spec, input_shapes):
        k1, k2 = spec.kernel
        return {"kernel": (k1, k2, input_shapes[0][-1], spec.channels), "bias": (spec.channels,)}

    @classmethod
    def init_weights(cls, spec, input_shapes, rng):
        k1, k2 = spec.kernel
        shapes = cls.weight_shapes(spec, input_shapes)
        return {
            "kernel": he_normal(shapes["kernel"], k1 * k2 * input_shapes[0][-1], rng),
            "bias": np.zeros(shapes["bias"], dtype=np.float32),
        }

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        out = ops.conv_forward(inputs[0], params["kernel"], spec.stride, spec.padding, bias=params["bias"])
        return _activate(spec, out)

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        k1, k2 = spec.kernel
        ho, wo, o = output_shape
        return ho * wo * o * (2 * k1 * k2 * input_shapes[0][-1] + 1)


class SeparableConvolution(Convolution):
    kind = LayerKind.SEPARABLE_CONVOLUTION

    @classmethod
    def weight_shapes(cls, spec, input_shapes):
        k1, k2 = spec.kernel
        channels_in = input_shapes[0][-1]
        return {
            "depthwise": (k1, k2, channels_in),
            "pointwise": (1, 1, channels_in, spec.channels),
            "bias": (spec.channels,),
        }

    @classmethod
    def init_weights(cls, spec, input_shapes, rng):
        k1, k2 = spec.kernel
        shapes = cls.weight_shapes(spec, input_shapes)
        return {
            "depthwise": he_normal(shapes["depthwise"], k1 * k2, rng),
            "pointwise": he_normal(shapes["pointwise"], input_shapes[0][-1], rng),
            "bias": np.zeros(shapes["bias"], dtype=np.float32),
        }

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        out = ops.separable_conv_forward(
            inputs[0], params["depthwise"], params["pointwise"], spec.stride, spec.padding, bias=params["bias"]
        )
        return _activate(spec, out)

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        k1, k2 = spec.kernel
        ho, wo, o = output_shape
        i = input_shapes[0][-1]
        return ho * wo * (2 * k1 * k2 * i + 2 * i * o + o)


class FullyConnected(AbstractLayer):
    kind = LayerKind.FULLY_CONNECTED

    @classmethod
    def output_shape(cls, spec, input_shapes):
        if len(input_shapes[0]) != 1:
            raise ShapeError(f"Fully connected layer {spec.id} needs a flat input, got {input_shapes[0]}")
        return (spec.channels,)

    @classmethod
    def weight_shapes(cls, spec, input_shapes):
        return {"kernel": (input_shapes[0][0], spec.channels), "bias": (spec.channels,)}

    @classmethod
    def init_weights(cls, spec, input_shapes, rng):
        return {
            "kernel": he_normal((input_shapes[0][0], spec.channels), input_shapes[0][0], rng),
            "bias": np.zeros(spec.channels, dtype=np.float32),
        }

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return _activate(spec, ops.dense(inputs[0], params["kernel"], params["bias"]))

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return (2 * input_shapes[0][0] + 1) * spec.channels


class MaxPool(AbstractLayer):
    kind = LayerKind.MAX_POOL

    @classmethod
    def output_shape(cls, spec, input_shapes):
        h, w, c = _spatial(spec, input_shapes[0])
        (k1, k2), (s1, s2) = spec.kernel, spec.stride
        return ops.conv_output_size(h, k1, s1, "valid"), ops.conv_output_size(w, k2, s2, "valid"), c

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return ops.max_pool(inputs[0], spec.kernel, spec.stride)

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return _size(output_shape) * spec.kernel[0] * spec.kernel[1]


class AvgPool(MaxPool):
    kind = LayerKind.AVG_POOL

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return ops.avg_pool(inputs[0], spec.kernel, spec.stride)


class GlobalAvgPool(AbstractLayer):
    kind = LayerKind.GLOBAL_AVG_POOL

    @classmethod
    def output_shape(cls, spec, input_shapes):
        return (_spatial(spec, input_shapes[0])[-1],)

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return ops.global_avg_pool(inputs[0])

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return _size(input_shapes[0])


class BatchNorm(AbstractLayer):
    kind = LayerKind.BATCH_NORM

    @classmethod
    def output_shape(cls, spec, input_shapes):
        return input_shapes[0]

    @classmethod
    def weight_shapes(cls, spec, input_shapes):
        return {"gamma": (input_shapes[0][-1],), "beta": (input_shapes[0][-1],)}

    @classmethod
    def init_weights(cls, spec, input_shapes, rng):
        channels = input_shapes[0][-1]
        return {"gamma": np.ones(channels, dtype=np.float32), "beta": np.zeros(channels, dtype=np.float32)}

    @classmethod
    def init_buffers(cls, spec, input_shapes):
        channels = input_shapes[0][-1]
        return {"moving_mean": np.zeros(channels, dtype=np.float32), "moving_var": np.ones(channels, dtype=np.float32)}

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        if ctx.training:
            out, mean, var = ops.batch_norm_train(inputs[0], params["gamma"], params["beta"], BN_EPSILON)
            ctx.batch_stats[spec.id] = (mean, var)
            return out
        return ops.batch_norm_inference(
            inputs[0], params["gamma"], params["beta"], buffers["moving_mean"], buffers["moving_var"], BN_EPSILON
        )

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return 2 * _size(output_shape)


class Dropout(AbstractLayer):
    kind = LayerKind.DROPOUT

    @classmethod
    def output_shape(cls, spec, input_shapes):
        return input_shapes[0]

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        if not ctx.training or ctx.rng is None:
            return inputs[0]
        return ops.dropout(inputs[0], spec.rate, ctx.rng)


class ReLU(Dropout):
    kind = LayerKind.RELU

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return ops.relu(inputs[0])

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return _size(output_shape)


class Softmax(ReLU):
    kind = LayerKind.SOFTMAX

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return ops.softmax(inputs[0])

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return 3 * _size(output_shape)


class Add(AbstractLayer):
    kind = LayerKind.ADD
    arity = 2

    @classmethod
    def output_shape(cls, spec, input_shapes):
        first, second = input_shapes
        if tuple(first) != tuple(second):
            raise ShapeError(f"Add layer {spec.id} merges unequal shapes {first} and {second}")
        return first

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return _activate(spec, ops.add(inputs[0], inputs[1]))

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        return _size(output_shape)


class Concat(AbstractLayer):
    kind = LayerKind.CONCAT
    arity = None

    @classmethod
    def output_shape(cls, spec, input_shapes):
        spatial = {tuple(shape[:-1]) for shape in input_shapes}
        if len(spatial) != 1:
            raise ShapeError(f"Concat layer {spec.id} merges unequal spatial dims {input_shapes}")
        return tuple(input_shapes[0][:-1]) + (sum(shape[-1] for shape in input_shapes),)

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        return ops.concat(inputs, axis=-1)


class Embedding(AbstractLayer):
    """Token ids [max_len] to a height-1 feature map [1, max_len, d]"""

    kind = LayerKind.EMBEDDING

    @classmethod
    def output_shape(cls, spec, input_shapes):
        if len(input_shapes[0]) != 1:
            raise ShapeError(f"Embedding layer {spec.id} needs a token id vector, got {input_shapes[0]}")
        return 1, input_shapes[0][0], spec.channels

    @classmethod
    def weight_shapes(cls, spec, input_shapes):
        return {"table": (spec.vocab, spec.channels)}

    @classmethod
    def init_weights(cls, spec, input_shapes, rng):
        return {"table": uniform((spec.vocab, spec.channels), 0.05, rng)}

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        ids = inputs[0].data.astype(np.int64)
        out = ops.embedding_lookup(params["table"], ids)
        return ops.reshape(out, (ids.shape[0], 1) + out.shape[1:])


class LSTM(AbstractLayer):
    """Consumes [max_len, d] or height-1 [1, max_len, d] sequences, emits the last hidden state"""

    kind = LayerKind.LSTM

    @classmethod
    def _features(cls, spec, shape):
        if len(shape) == 3 and shape[0] == 1:
            return shape[1], shape[2]
        if len(shape) == 2:
            return shape
        raise ShapeError(f"LSTM layer {spec.id} needs a sequence input, got {shape}")

    @classmethod
    def output_shape(cls, spec, input_shapes):
        cls._features(spec, input_shapes[0])
        return (spec.channels,)

    @classmethod
    def weight_shapes(cls, spec, input_shapes):
        _, features = cls._features(spec, input_shapes[0])
        hidden = spec.channels
        return {"w_x": (features, 4 * hidden), "w_h": (hidden, 4 * hidden), "bias": (4 * hidden,)}

    @classmethod
    def init_weights(cls, spec, input_shapes, rng):
        shapes = cls.weight_shapes(spec, input_shapes)
        return {
            "w_x": he_normal(shapes["w_x"], shapes["w_x"][0], rng),
            "w_h": he_normal(shapes["w_h"], spec.channels, rng),
            "bias": np.zeros(shapes["bias"], dtype=np.float32),
        }

    @classmethod
    def forward(cls, spec, inputs, params, buffers, ctx):
        x = inputs[0]
        if x.ndim == 4:
            x = ops.reshape(x, (x.shape[0],) + x.shape[2:])
        return lstm_forward(x, LSTMParams(params["w_x"], params["w_h"], params["bias"]))

    @classmethod
    def flops(cls, spec, input_shapes, output_shape):
        steps, features = cls._features(spec, input_shapes[0])
        hidden = spec.channels
        return steps * (2 * (features + hidden) * 4 * hidden + 4 * hidden + 6 * hidden)


layer_registry: dict[LayerKind, type[AbstractLayer]] = {}
layer_registry.update(
    {
        layer.kind: layer
        for layer in [
            InputLayer,
            Convolution,
            SeparableConvolution,
            FullyConnected,
            MaxPool,
            AvgPool,
            GlobalAvgPool,
            BatchNorm,
            Dropout,
            ReLU,
            Softmax,
            Add,
            Concat,
            Embedding,
            LSTM,
        ]
    }
)


def get_layer(kind: LayerKind) -> type[AbstractLayer]:
    try:
        return layer_registry[kind]
    except KeyError:
        raise UnknownLayerError(f"No implementation registered for {kind}")
