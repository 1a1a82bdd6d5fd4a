"""
1. Forward examples for graph convolution, sortpool, conv1d, activations, heads and losses
2. Gradients of every op match central finite differences
3. Sortpool routes gradients to the selected rows only
4. backward rejects non-scalar or input-only tensors; parameters off the loss path stay at zero
5. Adam: zero gradient keeps parameters, first step matches the hand-computed update
6. ParamStore checkpoints restore every tensor; corrupt payloads are rejected
"""
import math

import numpy as np
import pytest
from scipy import sparse

from autodiff import ops
from autodiff.adam import AdamState, adam_step
from autodiff.params import ParamStore, decode_params, encode_params, load_params
from autodiff.tensor import Parameter, backward, constant
from tools.errors import CheckpointFormatError, ContractViolation


def numeric_gradient(fn, param: Parameter, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(param.values)
    for index in np.ndindex(param.values.shape):
        original = param.values[index]
        param.values[index] = original + step
        plus = fn()
        param.values[index] = original - step
        minus = fn()
        param.values[index] = original
        grad[index] = (plus - minus) / (2 * step)
    return grad


def check_gradient(loss_fn, params, tolerance=1e-6):
    for p in params:
        p.zero_grad()
    backward(loss_fn())
    for p in params:
        expected = numeric_gradient(lambda: loss_fn().item(), p)
        scale = max(1.0, np.abs(expected).max())
        assert np.abs(p.grad - expected).max() <= tolerance * scale, p.name


# forward examples

def test_graph_conv_examples():
    s = sparse.csr_matrix(np.array([[1.0]]))
    out = ops.graph_conv_forward(constant([[0.5]]), s, Parameter("w", [[2.0]]))
    assert np.allclose(out.values, [[math.tanh(1.0)]])

    s = sparse.csr_matrix(np.full((2, 2), 0.5))
    out = ops.graph_conv_forward(constant([[1.0], [3.0]]), s, Parameter("w", [[1.0]]))
    assert np.allclose(out.values, math.tanh(2.0))
    zero = ops.graph_conv_forward(constant([[1.0], [3.0]]), s, Parameter("w", [[0.0]]))
    assert np.all(zero.values == 0.0)


def test_graph_conv_shape_mismatch():
    s = sparse.identity(2, format="csr")
    with pytest.raises(ContractViolation):
        ops.graph_conv_forward(constant(np.ones((3, 1))), s, Parameter("w", [[1.0]]))


def test_sortpool_examples():
    h = constant([[1.0, 0.1], [2.0, 0.2]])
    assert ops.sortpool(constant([[0.0, 0.9], [0.0, 0.5]]), 2).values.tolist() == [[0.0, 0.9], [0.0, 0.5]]
    padded = ops.sortpool(constant([[4.0, 5.0]]), 3).values
    assert padded.tolist() == [[4.0, 5.0], [0.0, 0.0], [0.0, 0.0]]
    picked = ops.sortpool(constant([[0.0, 0.2], [1.0, 0.9], [2.0, 0.5]]), 2).values
    assert picked[:, 0].tolist() == [1.0, 2.0]
    assert ops.sortpool(h, 1).values.tolist() == [[2.0, 0.2]]


def test_sortpool_ties_use_earlier_columns_then_index():
    values = np.array([[0.0, 1.0], [5.0, 1.0], [5.0, 1.0]])
    assert ops.sortpool_order(values).tolist() == [1, 2, 0]


def test_conv1d_examples():
    x = constant([[1.0, 2.0, 3.0]])
    assert ops.conv1d(x, Parameter("f", [[[1.0, 0.0, -1.0]]])).values.tolist() == [[-2.0]]
    assert ops.conv1d(x, Parameter("f", [[[1.0, 1.0]]])).values.tolist() == [[3.0, 5.0]]
    x4 = constant([[1.0, 2.0, 3.0, 4.0]])
    assert ops.conv1d(x4, Parameter("f", [[[1.0, 1.0]]]), stride=2).values.tolist() == [[3.0, 7.0]]
    with pytest.raises(ContractViolation):
        ops.conv1d(x, Parameter("f", [[[1.0] * 4]]))


def test_activation_and_head_examples():
    assert ops.relu(constant([-1.0, 0.0, 2.0])).values.tolist() == [0.0, 0.0, 2.0]
    assert np.allclose(ops.log_softmax(constant([3.0, 3.0])).values, -math.log(2))
    z = np.array([0.3, -1.2, 2.0])
    shifted = ops.log_softmax(constant(z + 100.0)).values
    assert np.allclose(shifted, ops.log_softmax(constant(z)).values, atol=1e-12)
    assert ops.dot_head(constant([1.0, 0.0]), constant([0.0, 1.0])).item() == 0.0
    assert ops.dot_head(constant([1.0, 2.0]), constant([1.0, 2.0])).item() == 5.0
    assert ops.dot_head(constant([0.0, 0.0]), constant([3.0, -4.0])).item() == 0.0


def test_loss_examples():
    assert ops.mse_loss(constant(0.5), 0.5).item() == 0.0
    assert ops.mse_loss(constant(1.0), 0.0).item() == 1.0
    uniform = ops.log_softmax(constant([0.0, 0.0]))
    assert ops.nll_loss(uniform, 1).item() == pytest.approx(math.log(2))
    with pytest.raises(ContractViolation):
        ops.nll_loss(uniform, 2)


# gradients

def test_dense_quadratic_gradient_closed_form():
    rng = np.random.default_rng(0)
    w = Parameter("w", rng.normal(size=(3, 2)))
    x = rng.normal(size=3)
    y = rng.normal(size=2)
    residual = ops.dense_forward(constant(x), w)
    loss = ops.mean([ops.mse_loss(ops.dot(residual, constant(e)), t) for e, t in zip(np.eye(2), y)])
    backward(loss)
    # mean over the two outputs of (xW - y)^2
    assert np.allclose(w.grad, np.outer(x, (x @ w.values - y)))


@pytest.mark.parametrize("stride", [1, 2])
def test_conv1d_and_bias_gradients(stride):
    rng = np.random.default_rng(stride)
    x = Parameter("x", rng.normal(size=(2, 9)))
    filters = Parameter("filters", rng.normal(size=(3, 2, 3)))
    bias = Parameter("bias", rng.normal(size=3))
    target = rng.normal(size=3)

    def loss():
        out = ops.relu(ops.conv1d_forward(x, filters, stride, bias))
        pooled = ops.matmul(ops.flatten(out), constant(rng_fixed_projection(out.values.size)))
        return ops.mse_loss(ops.dot(pooled, constant(target)), 0.3)

    check_gradient(loss, [x, filters, bias])


def rng_fixed_projection(size):
    return np.random.default_rng(99).normal(size=(size, 3))


def test_graph_pipeline_gradients():
    rng = np.random.default_rng(4)
    s = sparse.csr_matrix(np.array([[0.5, 0.5, 0.0], [1 / 3, 1 / 3, 1 / 3], [0.0, 0.5, 0.5]]))
    h0 = constant(rng.normal(size=(3, 2)))
    w1 = Parameter("w1", rng.normal(size=(2, 3)))
    w2 = Parameter("w2", rng.normal(size=(3, 1)))
    b1 = Parameter("b1", rng.normal(size=3))
    dense = Parameter("dense", rng.normal(size=(8, 2)))

    def loss():
        h1 = ops.tanh(ops.add_bias(ops.matmul(ops.propagate(s, h0), w1), b1))
        h2 = ops.graph_conv_forward(h1, s, w2)
        pooled = ops.sortpool(ops.concat_columns([h1, h2]), 2)
        logits = ops.dense_forward(ops.flatten(pooled), dense)
        return ops.nll_loss(ops.log_softmax(logits), 1)

    check_gradient(loss, [w1, w2, b1, dense])


def test_sortpool_routes_gradient_to_selected_rows():
    h = Parameter("h", [[0.0, 0.1], [0.0, 0.9], [0.0, 0.5]])
    out = ops.sortpool(h, 2)
    backward(ops.dot(ops.flatten(out), constant(np.ones(4))))
    assert h.grad.tolist() == [[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]


def test_dropout_gradient_uses_the_same_mask():
    x = Parameter("x", np.ones(50))
    out = ops.dropout(x, 0.5, np.random.default_rng(0))
    backward(ops.dot(out, constant(np.ones(50))))
    assert np.array_equal(x.grad, out.values)
    assert ops.dropout(x, 0.5, None) is x


def test_backward_contract():
    with pytest.raises(ContractViolation):
        backward(constant(1.0))
    v = Parameter("v", [1.0, 2.0])
    with pytest.raises(ContractViolation):
        backward(ops.relu(v))


def test_parameters_off_the_loss_path_get_zero_gradient():
    used = Parameter("used", [1.0, 2.0])
    unused = Parameter("unused", [3.0, 4.0])
    backward(ops.dot(used, constant([1.0, 1.0])))
    assert used.grad.tolist() == [1.0, 1.0]
    assert unused.grad.tolist() == [0.0, 0.0]


def test_shared_parameter_accumulates_both_branches():
    w = Parameter("w", [[2.0]])
    left = ops.matmul(constant([1.0]), w)
    right = ops.matmul(constant([3.0]), w)
    backward(ops.dot(left, right))
    # d/dw (1w * 3w) = 6w
    assert w.grad.tolist() == [[12.0]]


# Adam

def _store(**values):
    store = ParamStore()
    for name, value in values.items():
        store.add(name, value)
    return store


def test_adam_zero_gradient_keeps_parameters():
    store = _store(a=[1.0, -2.0])
    adam_step(store, AdamState(learning_rate=0.1))
    assert store["a"].values.tolist() == [1.0, -2.0]


def test_adam_first_step():
    store = _store(a=[0.5])
    store["a"].grad = np.array([0.2])
    state = AdamState(learning_rate=0.01)
    adam_step(store, state)
    m_hat = (0.1 * 0.2) / 0.1
    v_hat = (0.001 * 0.04) / 0.001
    expected = 0.5 - 0.01 * m_hat / (math.sqrt(v_hat) + 1e-8)
    assert store["a"].values[0] == pytest.approx(expected, rel=1e-12)
    assert state.step == 1


def test_non_finite_gradient_shows_up_after_the_step():
    store = _store(a=[1.0], b=[2.0])
    assert store.all_finite()
    store["a"].grad = np.array([np.nan])
    adam_step(store, AdamState(learning_rate=0.1))
    assert not store.all_finite()
    assert store["b"].values.tolist() == [2.0]


# checkpoints

def test_param_checkpoint_restores_values():
    rng = np.random.default_rng(2)
    store = _store(w=rng.normal(size=(3, 4)), b=rng.normal(size=4), s=np.array(1.5))
    payload = encode_params(store)
    decoded = decode_params(payload)
    assert list(decoded) == ["w", "b", "s"]
    fresh = _store(w=np.zeros((3, 4)), b=np.zeros(4), s=np.array(0.0))
    load_params(fresh, payload)
    for name in store:
        assert np.array_equal(fresh[name].values, store[name].values)


def test_corrupt_param_checkpoint():
    payload = encode_params(_store(w=np.ones((2, 2))))
    with pytest.raises(CheckpointFormatError):
        decode_params(payload[:-1])
    with pytest.raises(CheckpointFormatError):
        decode_params(payload + b"\x00")
    with pytest.raises(CheckpointFormatError):
        load_params(_store(w=np.ones(3)), payload)
