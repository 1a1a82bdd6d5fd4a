"""ParamStore - named, ordered learned tensors and their checkpoint format"""

import struct
from collections import OrderedDict
from typing import Dict, Iterator, Tuple

import numpy as np

from autodiff.tensor import Parameter
from tools.errors import CheckpointFormatError

PARAMS_MAGIC = b"KPRM"
_COUNT = struct.Struct("<4sI")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class ParamStore:
    """Deterministically ordered collection of Parameters."""

    def __init__(self):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()

    def add(self, name: str, values) -> Parameter:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        param = Parameter(name, np.array(values, dtype=np.float64))
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterator[Tuple[str, Parameter]]:
        return iter(self._params.items())

    def zero_grad(self):
        for param in self._params.values():
            param.zero_grad()

    def count(self) -> int:
        """Total number of scalar parameters."""
        return int(sum(param.values.size for param in self._params.values()))

    def norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(p.values * p.values)) for p in self._params.values())))

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: param.values.copy() for name, param in self._params.items()}

    def restore(self, snapshot: Dict[str, np.ndarray]):
        for name, values in snapshot.items():
            param = self._params[name]
            if values.shape != param.values.shape:
                raise CheckpointFormatError(f"{name}: shape {values.shape} != {param.values.shape}")
            param.values = np.array(values, dtype=np.float64)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p.values)) for p in self._params.values())


def encode_params(params: ParamStore) -> bytes:
    """Flat binary: per tensor name length, name, rank, dims, little-endian float64 values."""
    chunks = [_COUNT.pack(PARAMS_MAGIC, len(params))]
    for name, param in params.items():
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(param.values.ndim))
        chunks.extend(_U64.pack(dim) for dim in param.values.shape)
        chunks.append(np.ascontiguousarray(param.values, dtype="<f8").tobytes(order="C"))
    return b"".join(chunks)


def decode_params(payload: bytes) -> "OrderedDict[str, np.ndarray]":
    try:
        magic, count = _COUNT.unpack_from(payload, 0)
        if magic != PARAMS_MAGIC:
            raise CheckpointFormatError("not a parameter checkpoint")
        offset = _COUNT.size
        tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (name_length,) = _U32.unpack_from(payload, offset)
            offset += _U32.size
            name = payload[offset:offset + name_length].decode("utf-8")
            offset += name_length
            (rank,) = _U32.unpack_from(payload, offset)
            offset += _U32.size
            shape = []
            for _ in range(rank):
                (dim,) = _U64.unpack_from(payload, offset)
                shape.append(dim)
                offset += _U64.size
            size = int(np.prod(shape)) if shape else 1
            end = offset + 8 * size
            if end > len(payload):
                raise CheckpointFormatError(f"{name}: truncated tensor data")
            tensors[name] = np.frombuffer(payload[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
            offset = end
    except struct.error as exc:
        raise CheckpointFormatError(f"truncated parameter checkpoint: {exc}")
    if offset != len(payload):
        raise CheckpointFormatError("trailing bytes after the last tensor")
    return tensors


def load_params(params: ParamStore, payload: bytes):
    tensors = decode_params(payload)
    missing = [name for name in params if name not in tensors]
    if missing:
        raise CheckpointFormatError(f"checkpoint lacks parameters {missing}")
    params.restore(tensors)
