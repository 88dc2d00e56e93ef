from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from neunets.errors import NeunetsError

# 32-bit everywhere; float64 is only accepted when explicitly requested (numerical checks)
DTYPE = np.float32


class ShapeError(NeunetsError):
    pass


class NonFiniteError(NeunetsError):
    pass


class TapeError(NeunetsError):
    pass


ArrayLike = Union[np.ndarray, float, int, Sequence]


class Function:
    """A differentiable operation

    `forward` gets the raw arrays of the input tensors, `backward` gets the gradient of the
    loss with respect to the output and returns one gradient (or None) per input tensor.
    """

    def __init__(self, *inputs: Tensor):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs) -> np.ndarray:
        raise NotImplementedError(repr(self))

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(repr(self))

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs) -> Tensor:
        func = cls(*inputs)
        out = func.forward(*(t.data for t in inputs), **kwargs)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{cls.__name__} produced non-finite values")
        requires_grad = any(t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad, creator=func if requires_grad else None, dtype=out.dtype)

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        """Sum out the dimensions numpy broadcasting added"""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


class Tensor:
    """Dense row-major array with an optional link to the operation that produced it"""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False, creator: Optional[Function] = None, dtype=DTYPE):
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.creator = creator
        self.grad: Optional[np.ndarray] = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    # arithmetic is implemented in neunets.tensor.ops, bound below to avoid a circular import
    def __add__(self, other):
        from neunets.tensor import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from neunets.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from neunets.tensor import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from neunets.tensor import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from neunets.tensor import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from neunets.tensor import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from neunets.tensor import ops
        return ops.getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        from neunets.tensor import ops
        return ops.reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from neunets.tensor import ops
        return ops.reduce_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from neunets.tensor import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if dtype is None:
        dtype = value.dtype if isinstance(value, np.ndarray) and value.dtype == np.float64 else DTYPE
    return Tensor(value, dtype=dtype)


def parameter(data: ArrayLike, dtype=DTYPE) -> Tensor:
    """A trainable leaf tensor"""
    return Tensor(np.array(data, dtype=dtype), requires_grad=True, dtype=dtype)


def _topological_order(output: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack = [(output, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.creator is not None:
            for inp in tensor.creator.inputs:
                if inp.requires_grad and id(inp) not in visited:
                    stack.append((inp, False))
    return order


def backward(output: Tensor, loss_grad: Optional[ArrayLike] = None) -> dict[Tensor, np.ndarray]:
    """Propagate `loss_grad` from `output` back to every trainable leaf

    Gradients are accumulated into `leaf.grad` and also returned, keyed by leaf tensor.

    :raises TapeError: if `output` was not produced by a recorded operation
    """
    if output.creator is None:
        raise TapeError("No recorded forward pass leads to this tensor")
    if loss_grad is None:
        loss_grad = np.ones_like(output.data)
    loss_grad = np.asarray(loss_grad, dtype=output.data.dtype)
    if loss_grad.shape != output.shape:
        loss_grad = np.broadcast_to(loss_grad, output.shape).copy()

    pending: dict[int, np.ndarray] = {id(output): loss_grad}
    leaves: dict[Tensor, np.ndarray] = {}
    for tensor in reversed(_topological_order(output)):
        grad = pending.pop(id(tensor), None)
        if grad is None:
            continue
        if tensor.creator is None:
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
            leaves[tensor] = tensor.grad
            continue
        input_grads = tensor.creator.backward(grad)
        for inp, input_grad in zip(tensor.creator.inputs, input_grads):
            if input_grad is None or not inp.requires_grad:
                continue
            input_grad = input_grad.astype(inp.data.dtype, copy=False)
            if id(inp) in pending:
                pending[id(inp)] = pending[id(inp)] + input_grad
            else:
                pending[id(inp)] = input_grad
    return leaves
