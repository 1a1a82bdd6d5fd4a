"""Differentiable operations needed by DGCNN and its two heads"""

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff.tensor import Tensor
from tools.errors import ContractViolation


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a @ b for a of rank 1 or 2 and b of rank 2."""
    if b.values.ndim != 2 or a.values.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ContractViolation(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def _backward(g):
        if av.ndim == 1:
            return bv @ g, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return Tensor(av @ bv, (a, b), _backward)


def propagate(s, h: Tensor) -> Tensor:
    """S @ H for a constant (possibly sparse) square matrix S."""
    if s.shape[0] != s.shape[1] or s.shape[1] != h.shape[0] or h.values.ndim != 2:
        raise ContractViolation(f"propagation shape mismatch: {s.shape} @ {h.shape}")
    out = s @ h.values
    s_t = s.T

    def _backward(g):
        return (np.asarray(s_t @ g),)

    return Tensor(np.asarray(out), (h,), _backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.values)
    return Tensor(out, (x,), lambda g: (g * (1.0 - out * out),))


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    return Tensor(np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,))


def add_bias(x: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """x + b broadcast along `axis` of x (the axis b runs over)."""
    axis = axis % x.values.ndim
    if b.values.ndim != 1 or b.shape[0] != x.shape[axis]:
        raise ContractViolation(f"bias of shape {b.shape} does not fit axis {axis} of {x.shape}")
    shape = [1] * x.values.ndim
    shape[axis] = b.shape[0]
    other_axes = tuple(i for i in range(x.values.ndim) if i != axis)

    def _backward(g):
        return g, g.sum(axis=other_axes) if other_axes else g

    return Tensor(x.values + b.values.reshape(shape), (x, b), _backward)


def concat_columns(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ContractViolation("nothing to concatenate")
    rows = tensors[0].shape[0]
    if any(t.values.ndim != 2 or t.shape[0] != rows for t in tensors):
        raise ContractViolation("column concatenation needs matrices with equal row counts")
    widths = [t.shape[1] for t in tensors]
    bounds = np.cumsum([0] + widths)

    def _backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return Tensor(np.concatenate([t.values for t in tensors], axis=1), tuple(tensors), _backward)


def sortpool_order(values: np.ndarray) -> np.ndarray:
    """Row order: descending by the last column, ties by earlier columns right to left, then index."""
    n, c = values.shape
    keys = [np.arange(n)] + [-values[:, j] for j in range(c)]
    return np.lexsort(keys)


def sortpool(h: Tensor, k: int) -> Tensor:
    """Keep the top-k rows in sortpool order; zero rows pad graphs with fewer than k nodes."""
    if k < 1:
        raise ContractViolation("sortpool needs k >= 1")
    if h.values.ndim != 2:
        raise ContractViolation("sortpool expects an n x c matrix")
    n, c = h.shape
    selected = sortpool_order(h.values)[:k]
    out = np.zeros((k, c))
    out[: len(selected)] = h.values[selected]

    def _backward(g):
        grad = np.zeros((n, c))
        grad[selected] = g[: len(selected)]
        return (grad,)

    return Tensor(out, (h,), _backward)


sortpool_forward = sortpool


def reshape(x: Tensor, shape) -> Tensor:
    original = x.shape
    return Tensor(x.values.reshape(shape), (x,), lambda g: (g.reshape(original),))


def flatten(x: Tensor) -> Tensor:
    return reshape(x, (-1,))


def conv1d(x: Tensor, filters: Tensor, stride: int = 1) -> Tensor:
    """Valid cross-correlation of x (channels x length) with filters (out x in x width)."""
    if x.values.ndim != 2 or filters.values.ndim != 3:
        raise ContractViolation("conv1d expects x of rank 2 and filters of rank 3")
    in_channels, length = x.shape
    out_channels, filter_in, width = filters.shape
    if filter_in != in_channels:
        raise ContractViolation(f"conv1d: filters expect {filter_in} channels, input has {in_channels}")
    if stride < 1:
        raise ContractViolation("conv1d stride must be >= 1")
    if length < width:
        raise ContractViolation(f"conv1d: input length {length} is shorter than filter width {width}")

    out_length = (length - width) // stride + 1
    windows = sliding_window_view(x.values, width, axis=1)[:, ::stride, :][:, :out_length, :]
    fv = filters.values
    out = np.einsum("ctj,ocj->ot", windows, fv)

    def _backward(g):
        grad_filters = np.einsum("ot,ctj->ocj", g, windows)
        grad_windows = np.einsum("ot,ocj->ctj", g, fv)
        grad_x = np.zeros((in_channels, length))
        span = stride * (out_length - 1) + 1
        for j in range(width):
            grad_x[:, j:j + span:stride] += grad_windows[:, :, j]
        return grad_x, grad_filters

    return Tensor(out, (x, filters), _backward)


def log_softmax(z: Tensor) -> Tensor:
    if z.values.ndim != 1:
        raise ContractViolation("log_softmax expects a vector")
    shifted = z.values - np.max(z.values)
    out = shifted - np.log(np.sum(np.exp(shifted)))
    probabilities = np.exp(out)
    return Tensor(out, (z,), lambda g: (g - probabilities * np.sum(g),))


def dot(e1: Tensor, e2: Tensor) -> Tensor:
    if e1.values.ndim != 1 or e1.shape != e2.shape:
        raise ContractViolation(f"dot needs equal-length vectors, got {e1.shape} and {e2.shape}")
    a, b = e1.values, e2.values
    return Tensor(np.dot(a, b), (e1, e2), lambda g: (g * b, g * a))


def mse_loss(pred: Tensor, target: float) -> Tensor:
    diff = pred.values - target
    return Tensor(diff * diff, (pred,), lambda g: (2.0 * diff * g,))


def nll_loss(logp: Tensor, cls: int) -> Tensor:
    if logp.values.ndim != 1 or not (0 <= cls < logp.shape[0]):
        raise ContractViolation(f"class {cls} outside [0, {logp.shape[0]})")
    size = logp.shape[0]

    def _backward(g):
        grad = np.zeros(size)
        grad[cls] = -g
        return (grad,)

    return Tensor(-logp.values[cls], (logp,), _backward)


def mean(tensors: Sequence[Tensor]) -> Tensor:
    """Mean of scalar tensors."""
    if not tensors:
        raise ContractViolation("mean over an empty batch")
    count = len(tensors)
    total = sum(float(t.values) for t in tensors)
    return Tensor(total / count, tuple(tensors), lambda g: tuple(g / count for _ in range(count)))


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when rate is 0 or no generator is given (evaluation)."""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return Tensor(x.values * keep, (x,), lambda g: (g * keep,))


# Layer-level forms

def graph_conv_forward(h: Tensor, s, w: Tensor, activation=tanh) -> Tensor:
    """activation(S · H · W) for one graph convolution layer."""
    if h.values.ndim != 2 or w.values.ndim != 2:
        raise ContractViolation("graph convolution expects matrices H and W")
    if s.shape != (h.shape[0], h.shape[0]) or h.shape[1] != w.shape[0]:
        raise ContractViolation(
            f"graph convolution shape mismatch: S {s.shape}, H {h.shape}, W {w.shape}"
        )
    return activation(matmul(propagate(s, h), w))


def dense_forward(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, w)
    return add_bias(out, b) if b is not None else out


def conv1d_forward(x: Tensor, filters: Tensor, stride: int = 1, b: Optional[Tensor] = None) -> Tensor:
    out = conv1d(x, filters, stride)
    return add_bias(out, b, axis=0) if b is not None else out


def dot_head(e1: Tensor, e2: Tensor) -> Tensor:
    return dot(e1, e2)
