"""DGCNN - graph convolutions, sortpooling, 1D convolutions and dense layers,
with a classification head and the siamese dot-product head."""

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from autodiff import ops
from autodiff.params import ParamStore, encode_params, load_params
from autodiff.tensor import Tensor, constant
from graphs.graph import Dataset, Graph, normalized_adjacency
from tools.errors import CheckpointFormatError, ConfigError
from tools.file_writer import write_bytes

EMBEDDING_STREAM = 0
HEAD_STREAM = 1
CHECKPOINT_TAG = b"KPNET"


class Conv1dSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    filters: int
    # None means "the concatenated channel width", so one step reads one node
    width: Optional[int] = None
    stride: Optional[int] = None


class NetworkConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_labels: int
    num_classes: int = 2
    conv_channels: List[int] = [32, 32, 32, 1]
    sortpool_k: int = 30
    conv1d: List[Conv1dSpec] = [Conv1dSpec(filters=16), Conv1dSpec(filters=32, width=5, stride=1)]
    dense_width: int = 128
    use_bias: bool = False
    dropout: float = 0.0

    @property
    def input_width(self) -> int:
        """One-hot width: every known label plus one out-of-vocabulary slot."""
        return self.num_labels + 1

    @property
    def concat_width(self) -> int:
        return sum(self.conv_channels)

    def conv1d_layout(self) -> List[Tuple[int, int, int, int, int]]:
        """(in_channels, out_channels, width, stride, out_length) per 1D convolution."""
        layout = []
        channels, length = 1, self.sortpool_k * self.concat_width
        for index, spec in enumerate(self.conv1d):
            width = spec.width if spec.width is not None else self.concat_width
            stride = spec.stride if spec.stride is not None else self.concat_width
            if width < 1 or stride < 1 or spec.filters < 1:
                raise ConfigError(f"conv1d layer {index}: filters, width and stride must be >= 1")
            if width > length:
                raise ConfigError(
                    f"conv1d layer {index}: width {width} exceeds the sequence length {length} "
                    f"left after sortpooling k={self.sortpool_k}"
                )
            out_length = (length - width) // stride + 1
            layout.append((channels, spec.filters, width, stride, out_length))
            channels, length = spec.filters, out_length
        return layout

    def check(self):
        if self.num_labels < 1:
            raise ConfigError("num_labels must be >= 1")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")
        if not self.conv_channels or any(c < 1 for c in self.conv_channels):
            raise ConfigError("conv_channels needs at least one layer, every width >= 1")
        if self.sortpool_k < 1:
            raise ConfigError("sortpool_k must be >= 1")
        if self.dense_width < 1:
            raise ConfigError("dense_width must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        self.conv1d_layout()

    def dense_input_width(self) -> int:
        layout = self.conv1d_layout()
        if not layout:
            return self.sortpool_k * self.concat_width
        _, channels, _, _, length = layout[-1]
        return channels * length


@dataclass
class Network:
    config: NetworkConfig
    params: ParamStore


def choose_sortpool_k(dataset: Dataset, coverage: float = 0.6, minimum: int = 10) -> int:
    """Largest k such that at least `coverage` of the graphs have n >= k."""
    sizes = sorted((g.node_count for g in dataset.graphs), reverse=True)
    if not sizes:
        return minimum
    index = max(0, int(np.ceil(coverage * len(sizes))) - 1)
    return max(minimum, sizes[index])


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream]))


def _head_values(config: NetworkConfig, seed: int) -> Dict[str, np.ndarray]:
    rng = _stream(seed, HEAD_STREAM)
    values = {"output.weight": _uniform(rng, (config.dense_width, config.num_classes), config.dense_width)}
    if config.use_bias:
        values["output.bias"] = np.zeros(config.num_classes)
    return values


def build(config: NetworkConfig, seed: int) -> Network:
    """Allocate every parameter; the same seed always yields the same values."""
    config.check()
    rng = _stream(seed, EMBEDDING_STREAM)
    params = ParamStore()

    fan_in = config.input_width
    for index, width in enumerate(config.conv_channels):
        params.add(f"graph_conv.{index}.weight", _uniform(rng, (fan_in, width), fan_in))
        if config.use_bias:
            params.add(f"graph_conv.{index}.bias", np.zeros(width))
        fan_in = width

    for index, (channels, filters, width, _, _) in enumerate(config.conv1d_layout()):
        params.add(f"conv1d.{index}.filters", _uniform(rng, (filters, channels, width), channels * width))
        if config.use_bias:
            params.add(f"conv1d.{index}.bias", np.zeros(filters))

    dense_in = config.dense_input_width()
    params.add("dense.weight", _uniform(rng, (dense_in, config.dense_width), dense_in))
    if config.use_bias:
        params.add("dense.bias", np.zeros(config.dense_width))

    for name, values in _head_values(config, seed).items():
        params.add(name, values)
    return Network(config, params)


def reset_head(net: Network, seed: int):
    """Replace the classification head with freshly initialized weights."""
    for name, values in _head_values(net.config, seed).items():
        net.params[name].values = values
        net.params[name].zero_grad()


def embedding_parameter_names(net: Network) -> List[str]:
    return [name for name in net.params if not name.startswith("output.")]


@lru_cache(maxsize=16384)
def graph_inputs(g: Graph, num_labels: int):
    """Normalized adjacency and one-hot node features (unknown labels share the OOV slot)."""
    features = np.zeros((g.node_count, num_labels + 1))
    slots = [label if label < num_labels else num_labels for label in g.node_labels]
    features[np.arange(g.node_count), slots] = 1.0
    return normalized_adjacency(g), features


def embed(net: Network, g: Graph) -> Tensor:
    """Graph embedding f(x) of width dense_width."""
    config = net.config
    params = net.params
    s, features = graph_inputs(g, config.num_labels)

    h = constant(features)
    layer_outputs = []
    for index in range(len(config.conv_channels)):
        weight = params[f"graph_conv.{index}.weight"]
        if config.use_bias:
            pre = ops.add_bias(ops.matmul(ops.propagate(s, h), weight), params[f"graph_conv.{index}.bias"])
            h = ops.tanh(pre)
        else:
            h = ops.graph_conv_forward(h, s, weight)
        layer_outputs.append(h)

    pooled = ops.sortpool(ops.concat_columns(layer_outputs), config.sortpool_k)
    sequence = ops.reshape(pooled, (1, -1))
    for index, (_, _, _, stride, _) in enumerate(config.conv1d_layout()):
        bias = params[f"conv1d.{index}.bias"] if config.use_bias else None
        sequence = ops.relu(ops.conv1d_forward(sequence, params[f"conv1d.{index}.filters"], stride, bias))

    bias = params["dense.bias"] if config.use_bias else None
    return ops.relu(ops.dense_forward(ops.flatten(sequence), params["dense.weight"], bias))


def classify(net: Network, g: Graph, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Log-probabilities over the C classes. Dropout is active only when `rng` is given."""
    embedding = ops.dropout(embed(net, g), net.config.dropout, rng)
    bias = net.params["output.bias"] if net.config.use_bias else None
    return ops.log_softmax(ops.dense_forward(embedding, net.params["output.weight"], bias))


def encode_network(net: Network, provenance: Optional[Dict[str, Any]] = None) -> bytes:
    header = CHECKPOINT_TAG + b" " + net.config.model_dump_json().encode("utf-8") + b"\n"
    header += json.dumps(provenance or {}, sort_keys=True, default=str).encode("utf-8") + b"\n"
    return header + encode_params(net.params)


def decode_network(payload: bytes) -> Tuple[Network, Dict[str, Any]]:
    try:
        config_line, rest = payload.split(b"\n", 1)
        provenance_line, params_payload = rest.split(b"\n", 1)
    except ValueError:
        raise CheckpointFormatError("network checkpoint header is incomplete")
    if not config_line.startswith(CHECKPOINT_TAG + b" "):
        raise CheckpointFormatError("not a network checkpoint")
    config = NetworkConfig.model_validate_json(config_line[len(CHECKPOINT_TAG) + 1:])
    provenance = json.loads(provenance_line.decode("utf-8"))
    net = build(config, seed=0)
    load_params(net.params, params_payload)
    return net, provenance


def save_network(path: str, net: Network, provenance: Optional[Dict[str, Any]] = None) -> str:
    return write_bytes(path, encode_network(net, provenance))


def load_network(path: str) -> Tuple[Network, Dict[str, Any]]:
    with open(path, "rb") as f:
        return decode_network(f.read())
