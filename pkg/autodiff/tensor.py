"""Reverse-mode autodiff over numpy arrays.

A Tensor remembers the tensors it was computed from and a closure mapping its
output gradient to one gradient per parent. `backward` walks the recorded
structure in reverse topological order and accumulates into Parameter
gradient buffers.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tools.errors import ContractViolation

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    __slots__ = ("values", "_parents", "_backward")

    def __init__(
        self,
        values,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[BackwardFn] = None,
    ):
        self.values = np.asarray(values, dtype=np.float64)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Parameter(Tensor):
    """Learned leaf tensor with its own gradient buffer."""

    __slots__ = ("name", "grad")

    def __init__(self, name: str, values):
        super().__init__(values)
        self.name = name
        self.grad = np.zeros_like(self.values)

    def zero_grad(self):
        self.grad = np.zeros_like(self.values)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def constant(values) -> Tensor:
    return Tensor(values)


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor):
    """Accumulate d(loss)/d(parameter) into every reachable Parameter.grad."""
    if loss._backward is None:
        raise ContractViolation("backward called on a tensor with no recorded forward computation")
    if loss.values.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if isinstance(node, Parameter):
            node.grad += grad
        if node._backward is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + parent_grad
            else:
                grads[id(parent)] = parent_grad
