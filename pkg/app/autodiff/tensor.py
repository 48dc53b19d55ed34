from collections import Counter
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from app.utils import GraphError, ShapeError


__all__ = ["Tensor", "Graph", "Node", "apply_op", "as_tensor", "diagnostics", "no_grad"]


# Counters for numerically degenerate events (e.g. normalizing a zero vector).
diagnostics: Counter = Counter()

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_active_graph: ContextVar["Graph | None"] = ContextVar("graph", default=None)


class Tensor:
    """Dense float64 array that may take part in a recorded graph."""
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass(eq=False)
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def apply_op(op: str, inputs: Sequence[Tensor], out: np.ndarray, backward: BackwardFn) -> Tensor:
    """Wrap a primitive's result, recording it on the active graph if needed."""
    graph = _active_graph.get()
    tracked = graph is not None and any(t.requires_grad for t in inputs)
    result = Tensor(out, requires_grad=tracked)
    if tracked:
        graph.nodes.append(Node(op, tuple(inputs), result, backward))
    return result


class Graph:
    """Tape of primitive applications in execution (hence topological) order.

    Operations are recorded while the graph is active; tensors computed outside
    any graph carry no history, which is how evaluation-mode passes run.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.evaluated = False

    @contextmanager
    def recording(self) -> Iterator["Graph"]:
        token = _active_graph.set(self)
        try:
            yield self
        finally:
            _active_graph.reset(token)
            self.evaluated = True

    def evaluate(
            self,
            program: Callable[..., Mapping[str, Tensor]],
            inputs: Mapping[str, Tensor]
    ) -> dict[str, Tensor]:
        with self.recording():
            outputs = program(**inputs)
        return dict(outputs)

    def backward(self, loss: Tensor) -> None:
        if not self.evaluated:
            raise GraphError("backward() called before the graph was evaluated")
        if loss.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            return

        tensors: dict[int, Tensor] = {id(loss): loss}
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            upstream = grads.get(id(node.output))
            if upstream is None:
                continue
            for tensor, local in zip(node.inputs, node.backward(upstream)):
                if local is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + local
                else:
                    grads[key] = local
                    tensors[key] = tensor

        for key, grad in grads.items():
            tensor = tensors[key]
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad


@contextmanager
def no_grad() -> Iterator[None]:
    token = _active_graph.set(None)
    try:
        yield
    finally:
        _active_graph.reset(token)
