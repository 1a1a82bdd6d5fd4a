"""Gram matrix files: flat little-endian binary plus a CSV export for debugging"""

import io
import struct

import numpy as np

from kernels.gram import GramMatrix
from kernels.spec import KernelKind, KernelSpec
from tools.errors import CheckpointFormatError
from tools.file_writer import write_bytes, write_file

GRAM_MAGIC = b"KGRM"
GRAM_VERSION = 1
# magic, version, M, kernel kind, h (-1 when absent), normalize flag, connected-only flag
HEADER = struct.Struct("<4sIQBiBB")
KIND_CODES = {KernelKind.WL: 0, KernelKind.SP: 1, KernelKind.GL3: 2}
CODE_KINDS = {code: kind for kind, code in KIND_CODES.items()}


def encode_gram(gram: GramMatrix) -> bytes:
    spec = gram.kernel_spec
    header = HEADER.pack(
        GRAM_MAGIC,
        GRAM_VERSION,
        gram.size,
        KIND_CODES[spec.kind],
        -1 if spec.h is None else spec.h,
        int(gram.normalized),
        int(spec.graphlet_connected_only),
    )
    return header + np.ascontiguousarray(gram.values, dtype="<f8").tobytes(order="C")


def decode_gram(payload: bytes) -> GramMatrix:
    if len(payload) < HEADER.size:
        raise CheckpointFormatError("truncated Gram header")
    magic, version, size, kind_code, h, normalized, connected = HEADER.unpack_from(payload)
    if magic != GRAM_MAGIC or version != GRAM_VERSION:
        raise CheckpointFormatError("not a Gram matrix file")
    if kind_code not in CODE_KINDS:
        raise CheckpointFormatError(f"unknown kernel kind code {kind_code}")
    expected = HEADER.size + 8 * size * size
    if len(payload) != expected:
        raise CheckpointFormatError(f"Gram payload holds {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f8", offset=HEADER.size).reshape(size, size).astype(np.float64)
    spec = KernelSpec(
        kind=CODE_KINDS[kind_code],
        h=None if h < 0 else h,
        normalize=bool(normalized),
        graphlet_connected_only=bool(connected),
    )
    return GramMatrix(values, bool(normalized), spec)


def write_gram_binary(path: str, gram: GramMatrix) -> str:
    return write_bytes(path, encode_gram(gram))


def read_gram_binary(path: str) -> GramMatrix:
    with open(path, "rb") as f:
        return decode_gram(f.read())


def write_gram_csv(path: str, gram: GramMatrix) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, gram.values, delimiter=",", fmt="%.17g")
    return write_file(path, buffer.getvalue())
