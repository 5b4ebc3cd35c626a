import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from modfuse.embeddings import (
    DTYPE_F64,
    EmbeddingMatrix,
    matrix_bytes,
    parse_matrix,
    project_embeddings,
    read_matrix,
    write_matrix,
)
from modfuse.errors import DataError, FormatError, ShapeError, TruncationError
from modfuse.tensor_nn import AffineLayer, Tensor2

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def test_minimal_file_is_27_bytes(tmp_path):
    # 4+4+2+1+1+4+4+2+1+4 bytes for a 1x1 float32 matrix with utt "a"
    path = tmp_path / "one.mfx"
    write_matrix(path, EmbeddingMatrix(utt_id="a", values=[[0.0]], kind="SSLE"))
    blob = path.read_bytes()
    assert len(blob) == 27
    assert blob[-4:] == b"\x00\x00\x00\x00"
    assert blob[:4] == b"MFX1"


def test_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(7, 5)).astype(np.float32)
    m = EmbeddingMatrix(utt_id="utt-42", values=values, kind="MODS")
    path = tmp_path / "m.mfx"
    write_matrix(path, m)
    back = read_matrix(path)
    assert back.utt_id == "utt-42"
    assert back.kind == "MODS"
    np.testing.assert_array_equal(back.values, values.astype(np.float64))
    # write(read(x)) is byte-identical
    assert matrix_bytes(back) == path.read_bytes()


def test_float64_roundtrip_bit_exact():
    values = np.random.default_rng(1).normal(size=(4, 3))
    m = EmbeddingMatrix(utt_id="p", values=values, kind="PARM")
    back = parse_matrix(matrix_bytes(m, dtype_code=DTYPE_F64))
    np.testing.assert_array_equal(back.values, values)


def test_canonical_ssl_geometry(tmp_path):
    values = np.zeros((201, 1024), dtype=np.float32)
    path = tmp_path / "ssl.mfx"
    write_matrix(path, EmbeddingMatrix(utt_id="x", values=values))
    back = read_matrix(path)
    assert back.values.shape == (201, 1024)


def test_golden_file_parses_to_known_values():
    m = read_matrix(os.path.join(DATA_DIR, "golden.mfx"))
    assert m.utt_id == "golden_utt"
    assert m.kind == "SSLE"
    expected = np.array([
        [0.5, -1.25],
        [3.0, 65536.0],
        [np.float32("0.33333334"), -0.0],
    ], dtype=np.float32).astype(np.float64)
    np.testing.assert_array_equal(m.values, expected)


def test_bad_magic():
    blob = bytearray(matrix_bytes(EmbeddingMatrix("a", [[1.0]])))
    blob[:4] = b"XXXX"
    with pytest.raises(FormatError):
        parse_matrix(bytes(blob))


def test_truncated_payload():
    blob = matrix_bytes(EmbeddingMatrix("a", [[1.0, 2.0]]))
    with pytest.raises(TruncationError):
        parse_matrix(blob[:-1])


def test_trailing_bytes_rejected():
    blob = matrix_bytes(EmbeddingMatrix("a", [[1.0, 2.0]]))
    with pytest.raises(FormatError):
        parse_matrix(blob + b"\x00\x00\x00\x00")


def test_oversized_declared_geometry_rejected():
    # header claims more rows than the payload carries
    blob = bytearray(matrix_bytes(EmbeddingMatrix("a", [[1.0, 2.0]])))
    struct.pack_into("<I", blob, 12, 10_000)
    with pytest.raises(TruncationError):
        parse_matrix(bytes(blob))


def test_nan_payload_rejected():
    blob = bytearray(matrix_bytes(EmbeddingMatrix("a", [[1.0]])))
    blob[-4:] = struct.pack("<f", np.nan)
    with pytest.raises(DataError):
        parse_matrix(bytes(blob))


def test_invariants_on_construction():
    with pytest.raises(ShapeError):
        EmbeddingMatrix(utt_id="a", values=np.zeros((0, 3)))
    with pytest.raises(DataError):
        EmbeddingMatrix(utt_id="a", values=[[np.nan]])
    with pytest.raises(FormatError):
        EmbeddingMatrix(utt_id="a", values=[[1.0]], kind="TOOLONG")


@given(
    arrays(
        dtype=np.float32,
        shape=st.tuples(st.integers(1, 8), st.integers(1, 8)),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=32),
    ),
    st.text(min_size=0, max_size=20),
    st.sampled_from(["SSLE", "MODS", "PARM"]),
)
@settings(max_examples=150, deadline=None)
def test_roundtrip_fuzz(values, utt_id, kind):
    m = EmbeddingMatrix(utt_id=utt_id, values=values, kind=kind)
    back = parse_matrix(matrix_bytes(m))
    assert back.utt_id == utt_id
    assert back.kind == kind
    np.testing.assert_array_equal(back.values, values.astype(np.float64))
    assert matrix_bytes(back) == matrix_bytes(m)


# -- projection ----------------------------------------------------------------

def test_projection_zero():
    layer = AffineLayer(
        weight=Tensor2(np.zeros((1024, 128)), requires_grad=True),
        bias=Tensor2(np.zeros((1, 128)), requires_grad=True),
    )
    m = EmbeddingMatrix(utt_id="z", values=np.zeros((201, 1024)))
    out = project_embeddings(m, layer)
    assert out.data.shape == (201, 128)
    assert np.all(out.data == 0.0)


def test_projection_selects_columns_with_identity_weight():
    w = np.zeros((1024, 128))
    w[:128, :] = np.eye(128)
    layer = AffineLayer(
        weight=Tensor2(w, requires_grad=True),
        bias=Tensor2(np.zeros((1, 128)), requires_grad=True),
    )
    values = np.random.default_rng(2).normal(size=(201, 1024))
    out = project_embeddings(EmbeddingMatrix("s", values), layer)
    np.testing.assert_array_equal(out.data, values[:, :128])


def test_projection_matches_direct_matmul():
    rng = np.random.default_rng(3)
    w = rng.normal(size=(1024, 128))
    b = rng.normal(size=(1, 128))
    layer = AffineLayer(
        weight=Tensor2(w, requires_grad=True),
        bias=Tensor2(b, requires_grad=True),
    )
    values = rng.normal(size=(201, 1024))
    out = project_embeddings(EmbeddingMatrix("r", values), layer)
    np.testing.assert_allclose(out.data, values @ w + b, atol=1e-12)


def test_projection_shape_mismatch():
    layer = AffineLayer(
        weight=Tensor2(np.zeros((8, 4)), requires_grad=True),
        bias=Tensor2(np.zeros((1, 4)), requires_grad=True),
    )
    with pytest.raises(ShapeError):
        project_embeddings(EmbeddingMatrix("m", np.zeros((3, 9))), layer)
