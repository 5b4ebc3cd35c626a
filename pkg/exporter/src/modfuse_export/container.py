"""Writer for the MFX1 matrix container consumed by the modfuse pipeline.

Byte layout (little-endian): magic "MFX1" (4) | kind tag (4) |
version u16 = 1 | dtype u8 = 0 (float32) | reserved u8 = 0 | rows u32 |
cols u32 | utt_id length u16 | utt_id UTF-8 | rows*cols float32 values,
row-major. This is the pipeline's published interchange format; the
exporter implements it independently and the integration tests confirm
the pipeline's own loader accepts the files.
"""

import hashlib
import struct

import numpy as np

MAGIC = b"MFX1"
VERSION = 1
KIND_SSL = b"SSLE"

_HEAD = struct.Struct("<4s4sHBBII")


def matrix_bytes(utt_id: str, values: np.ndarray, kind: bytes = KIND_SSL) -> bytes:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ValueError(f"need a 2-D matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{utt_id}: non-finite values")
    utt = utt_id.encode("utf-8")
    rows, cols = values.shape
    return (
        _HEAD.pack(MAGIC, kind, VERSION, 0, 0, rows, cols)
        + struct.pack("<H", len(utt)) + utt
        + values.tobytes()
    )


def payload_sha256(values: np.ndarray) -> str:
    """Hash of the float32 payload section, as recorded in the integrity TSV."""
    return hashlib.sha256(
        np.ascontiguousarray(values, dtype="<f4").tobytes()
    ).hexdigest()


def write_matrix_file(path, utt_id: str, values: np.ndarray) -> str:
    blob = matrix_bytes(utt_id, values)
    with open(path, "wb") as fh:
        fh.write(blob)
    return payload_sha256(values)
