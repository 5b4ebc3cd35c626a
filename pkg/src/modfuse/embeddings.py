"""The MFX1 binary matrix container and SSL-embedding projection.

One container serves every matrix this pipeline moves between processes:
SSL embeddings (kind "SSLE"), cached modulation features (kind "MODS"),
and checkpoint parameter sections (kind "PARM").

Byte layout, all little-endian:

    offset  size  field
    0       4     magic  b"MFX1"
    4       4     kind tag (4 ASCII bytes)
    8       2     version, u16 = 1
    10      1     dtype code, u8: 0 = float32, 1 = float64
    11      1     reserved, u8 = 0
    12      4     rows, u32
    16      4     cols, u32
    20      2     utt_id byte length, u16
    22      n     utt_id, UTF-8
    22+n    ...   rows*cols values, row-major

Embeddings and feature caches are written float32 (they originate from a
32-bit model; nothing is lost) and widened to float64 in memory. The
float64 code exists for checkpoint sections, where reload must be
bit-exact.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError, ShapeError, TruncationError
from .tensor_nn import AffineLayer, Tensor2, constant

MAGIC = b"MFX1"
VERSION = 1
KIND_SSL = "SSLE"
KIND_MODSPEC = "MODS"
KIND_PARAM = "PARM"

DTYPE_F32 = 0
DTYPE_F64 = 1
_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_F64: np.dtype("<f8")}

_HEAD = struct.Struct("<4s4sHBBII")

SSL_DIM = 1024


@dataclass
class EmbeddingMatrix:
    """A named time x dim matrix; canonically 201 x 1024 for SSL features."""

    utt_id: str
    values: np.ndarray
    kind: str = KIND_SSL

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeError(f"matrix must be 2-D and non-empty, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError(f"matrix {self.utt_id!r} holds non-finite values")
        if len(self.kind) != 4 or not self.kind.isascii():
            raise FormatError(f"kind tag must be 4 ASCII chars, got {self.kind!r}")
        self.values = v


def write_matrix(path, m: EmbeddingMatrix, dtype_code: int = DTYPE_F32):
    """Serialize to the MFX1 layout. Bit-exact: same matrix, same bytes."""
    if dtype_code not in _DTYPES:
        raise FormatError(f"unknown dtype code {dtype_code}")
    rows, cols = m.values.shape
    utt = m.utt_id.encode("utf-8")
    if len(utt) > 0xFFFF:
        raise FormatError("utt_id longer than 65535 bytes")
    blob = bytearray()
    blob += _HEAD.pack(MAGIC, m.kind.encode("ascii"), VERSION,
                       dtype_code, 0, rows, cols)
    blob += struct.pack("<H", len(utt)) + utt
    blob += np.ascontiguousarray(m.values, dtype=_DTYPES[dtype_code]).tobytes()
    if hasattr(path, "write"):
        path.write(bytes(blob))
    else:
        with open(path, "wb") as fh:
            fh.write(bytes(blob))


def read_matrix(path) -> EmbeddingMatrix:
    """Exact inverse of write_matrix; values widened to float64."""
    if hasattr(path, "read"):
        data = path.read()
        label = "<stream>"
    else:
        with open(path, "rb") as fh:
            data = fh.read()
        label = str(path)
    return parse_matrix(data, label)


def parse_matrix(data: bytes, label: str = "<bytes>") -> EmbeddingMatrix:
    if len(data) < _HEAD.size + 2:
        raise TruncationError(f"{label}: shorter than a minimal header")
    magic, kind, version, dtype_code, reserved, rows, cols = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{label}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{label}: unsupported version {version}")
    if dtype_code not in _DTYPES:
        raise FormatError(f"{label}: unknown dtype code {dtype_code}")
    if reserved != 0:
        raise FormatError(f"{label}: reserved byte set")
    if rows < 1 or cols < 1:
        raise FormatError(f"{label}: empty geometry {rows}x{cols}")
    (utt_len,) = struct.unpack_from("<H", data, _HEAD.size)
    body = _HEAD.size + 2
    if len(data) < body + utt_len:
        raise TruncationError(f"{label}: truncated inside utt_id")
    utt_id = data[body:body + utt_len].decode("utf-8")
    payload = data[body + utt_len:]
    dt = _DTYPES[dtype_code]
    expected = rows * cols * dt.itemsize
    if len(payload) < expected:
        raise TruncationError(
            f"{label}: payload {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise FormatError(f"{label}: {len(payload) - expected} trailing bytes")
    values = np.frombuffer(payload, dtype=dt).reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{label}: non-finite payload entries")
    return EmbeddingMatrix(utt_id=utt_id, values=values, kind=kind.decode("ascii"))


def matrix_bytes(m: EmbeddingMatrix, dtype_code: int = DTYPE_F32) -> bytes:
    buf = io.BytesIO()
    write_matrix(buf, m, dtype_code)
    return buf.getvalue()


def project_embeddings(m: EmbeddingMatrix, layer: AffineLayer) -> Tensor2:
    """Row-wise affine map into the fusion input dimension (1024 -> 128
    canonically). Part of the differentiable graph; the layer trains
    end-to-end."""
    if m.values.shape[1] != layer.in_dim:
        raise ShapeError(
            f"embedding dim {m.values.shape[1]} does not match projection "
            f"input {layer.in_dim}"
        )
    return layer.apply(constant(m.values))
