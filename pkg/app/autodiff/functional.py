"""Differentiable primitives over `Tensor`.

Each primitive computes its output with numpy and registers a closure mapping
the upstream gradient to one gradient per input (None for constants).
"""
from typing import Sequence

import numpy as np

from app.utils import ShapeError

from .tensor import Tensor, apply_op, as_tensor, diagnostics


__all__ = [
    "add", "sub", "mul", "div", "neg", "matmul", "dot", "relu", "exp", "log",
    "sum", "mean", "reshape", "transpose", "getitem", "concat",
    "l2_normalize", "l2_normalize_array", "batch_norm", "logsumexp",
    "NORM_FLOOR",
]


NORM_FLOOR = 1e-12


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary_shapes(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return apply_op("add", (a, b), a.data + b.data, backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return apply_op("sub", (a, b), a.data - b.data, backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return apply_op("mul", (a, b), a.data * b.data, backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _binary_shapes("div", a, b)

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )
    return apply_op("div", (a, b), a.data / b.data, backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return apply_op("neg", (a,), -a.data, lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")

    def backward(g):
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g
    return apply_op("matmul", (a, b), a.data @ b.data, backward)


def dot(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot: needs two vectors of equal length, got {a.shape} and {b.shape}")

    def backward(g):
        return g * b.data, g * a.data
    return apply_op("dot", (a, b), np.dot(a.data, b.data), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return apply_op("relu", (a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return apply_op("exp", (a,), out, lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return apply_op("log", (a,), out, lambda g: (g / a.data,))


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(ax % len(shape) for ax in axes)
    if not keepdims:
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape).copy()


def sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (_expand_reduced(g, a.shape, axis, keepdims),)
    return apply_op("sum", (a,), np.sum(a.data, axis=axis, keepdims=keepdims), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    """Average over `axis`; with spatial axes this is average pooling."""
    a = as_tensor(a)
    out = np.mean(a.data, axis=axis, keepdims=keepdims)
    count = a.size // max(np.size(out), 1)

    def backward(g):
        return (_expand_reduced(g, a.shape, axis, keepdims) / count,)
    return apply_op("mean", (a,), out, backward)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {tuple(shape)}") from None
    return apply_op("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {tuple(axes)} do not permute shape {a.shape}")
    inverse = np.argsort(axes)
    return apply_op("transpose", (a,), a.data.transpose(axes), lambda g: (g.transpose(inverse),))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    out = np.array(a.data[index])

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)
    return apply_op("getitem", (a,), out, backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat: shapes {shapes} do not agree off axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))
    return apply_op("concat", tuple(tensors), out, backward)


def l2_normalize_array(x: np.ndarray, floor: float = NORM_FLOOR) -> np.ndarray:
    """Normalize along the last axis; rows with norm below `floor` pass unchanged."""
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    degenerate = norms < floor
    if degenerate.any():
        diagnostics["degenerate_l2"] += int(degenerate.sum())
    return np.where(degenerate, x, x / np.where(degenerate, 1.0, norms))


def l2_normalize(a, floor: float = NORM_FLOOR) -> Tensor:
    a = as_tensor(a)
    norms = np.linalg.norm(a.data, axis=-1, keepdims=True)
    degenerate = norms < floor
    if degenerate.any():
        diagnostics["degenerate_l2"] += int(degenerate.sum())
    safe = np.where(degenerate, 1.0, norms)
    out = np.where(degenerate, a.data, a.data / safe)

    def backward(g):
        radial = np.sum(out * g, axis=-1, keepdims=True)
        return (np.where(degenerate, g, (g - out * radial) / safe),)
    return apply_op("l2_normalize", (a,), out, backward)


def batch_norm(
        x,
        gamma: Tensor,
        beta: Tensor,
        running_mean: np.ndarray,
        running_var: np.ndarray,
        train: bool,
        momentum: float = 0.9,
        eps: float = 1e-5,
) -> Tensor:
    """Batch normalization over axis 0 of a (batch, features) input.

    Training mode normalizes with the batch statistics and folds them into the
    running buffers in place (`running = momentum * running + (1 - momentum) * batch`);
    evaluation mode normalizes with the running buffers.
    """
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batch_norm: input {x.shape} does not match {gamma.shape[0]} features")

    if train:
        batch_mean = x.data.mean(axis=0)
        batch_var = x.data.var(axis=0)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * batch_mean
        running_var *= momentum
        running_var += (1.0 - momentum) * batch_var
    else:
        batch_mean, batch_var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(batch_var + eps)
    x_hat = (x.data - batch_mean) * inv_std
    out = gamma.data * x_hat + beta.data

    def backward(g):
        d_gamma = np.sum(g * x_hat, axis=0)
        d_beta = np.sum(g, axis=0)
        d_xhat = g * gamma.data
        if not train:
            return d_xhat * inv_std, d_gamma, d_beta
        n = x.shape[0]
        d_x = (inv_std / n) * (
            n * d_xhat - d_xhat.sum(axis=0) - x_hat * np.sum(d_xhat * x_hat, axis=0)
        )
        return d_x, d_gamma, d_beta
    return apply_op("batch_norm", (x, gamma, beta), out, backward)


def logsumexp(a, weights: np.ndarray | None = None) -> Tensor:
    """log(sum(weights * exp(a))) over a vector, shifted by max(a) for stability."""
    a = as_tensor(a)
    shift = float(np.max(a.data))
    terms = exp(sub(a, shift))
    if weights is not None:
        terms = mul(terms, weights)
    return add(log(sum(terms)), shift)


def _rsub(a, b):
    return sub(b, a)


def _rdiv(a, b):
    return div(b, a)


Tensor.__add__ = add
Tensor.__radd__ = add
Tensor.__sub__ = sub
Tensor.__rsub__ = _rsub
Tensor.__mul__ = mul
Tensor.__rmul__ = mul
Tensor.__truediv__ = div
Tensor.__rtruediv__ = _rdiv
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
Tensor.__getitem__ = getitem
Tensor.sum = sum
Tensor.mean = mean
Tensor.reshape = reshape
Tensor.transpose = transpose
Tensor.relu = relu
Tensor.exp = exp
Tensor.log = log
