from typing import Callable

import numpy as np

from app.utils import NumericalError

from .tensor import Tensor


__all__ = ["finite_difference_gradient", "relative_error"]


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def finite_difference_gradient(
        f: Callable[[Tensor], Tensor | float],
        x: Tensor | np.ndarray,
        step: float = 1e-5
) -> Tensor:
    """Central-difference estimate of the gradient of a scalar function at `x`."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    grad_flat = grad.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + step
        upper = _scalar(f(Tensor(base.copy())))
        flat[k] = original - step
        lower = _scalar(f(Tensor(base.copy())))
        flat[k] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NumericalError(f"non-finite function value while perturbing coordinate {k}")
        grad_flat[k] = (upper - lower) / (2.0 * step)
    return Tensor(grad)


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    actual, expected = np.asarray(actual), np.asarray(expected)
    scale = max(np.max(np.abs(actual)), np.max(np.abs(expected)), 1e-12)
    return float(np.max(np.abs(actual - expected)) / scale)
