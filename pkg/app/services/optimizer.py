import numpy as np

from app.autodiff import Tensor
from app.utils import NumericalError


__all__ = ["OptimizerState", "SGDMomentum", "sgd_momentum_step"]


class OptimizerState:
    def __init__(self, velocity: dict[str, np.ndarray]):
        self.velocity = velocity

    @classmethod
    def zeros_like(cls, params: dict[str, Tensor]) -> "OptimizerState":
        return cls({name: np.zeros_like(tensor.data) for name, tensor in params.items()})

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: buffer.copy() for name, buffer in self.velocity.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, buffer in self.velocity.items():
            if name not in state or state[name].shape != buffer.shape:
                raise NumericalError(f"optimizer state for '{name}' is missing or mis-shaped")
            np.copyto(buffer, state[name])


def sgd_momentum_step(
        params: dict[str, Tensor],
        state: OptimizerState,
        learning_rate: float,
        momentum: float
) -> None:
    """velocity <- momentum * velocity + grad; param <- param - lr * velocity."""
    for name, tensor in params.items():
        if tensor.grad is None:
            raise NumericalError(f"no gradient for parameter '{name}'")
    for name, tensor in params.items():
        velocity = state.velocity[name]
        velocity *= momentum
        velocity += tensor.grad
        tensor.data -= learning_rate * velocity


class SGDMomentum:
    def __init__(self, params: dict[str, Tensor], learning_rate: float, momentum: float):
        self.params = params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.state = OptimizerState.zeros_like(params)

    def zero_grad(self) -> None:
        # parameters off the loss path keep a zero gradient and stay put
        for tensor in self.params.values():
            tensor.grad = np.zeros_like(tensor.data)

    def step(self) -> None:
        sgd_momentum_step(self.params, self.state, self.learning_rate, self.momentum)
