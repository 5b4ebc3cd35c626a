import numpy as np
import pytest

from modfuse.classifier import HeadParams, head_logits, pool_features, score
from modfuse.errors import EmptyInputError, ParameterError
from modfuse.fusion import FusedFeature
from modfuse.tensor_nn import AffineLayer, Tensor2, constant


def _feature(values):
    return FusedFeature(values=constant(values))


def test_pool_constant_matrix():
    f = _feature(np.full((5, 3), 2.5))
    out = pool_features(f).data
    np.testing.assert_array_equal(out, np.full((1, 6), 2.5))


def test_pool_single_row():
    row = np.array([[1.0, -2.0, 0.5]])
    out = pool_features(_feature(row)).data
    np.testing.assert_array_equal(out, np.hstack([row, row]))


def test_pool_random_matches_hand_computation():
    x = np.array([[1.0, -1.0], [3.0, 0.0], [-2.0, 5.0]])
    out = pool_features(_feature(x)).data
    np.testing.assert_allclose(out, [[3.0, 5.0, 2.0 / 3.0, 4.0 / 3.0]])


def test_pool_empty_sequence():
    with pytest.raises(EmptyInputError):
        pool_features(_feature(np.zeros((0, 4))))


def _head(seed=0, model_dim=4, hidden_dim=3):
    return HeadParams.init(seed, model_dim=model_dim, hidden_dim=hidden_dim)


def test_score_equal_logits_zero():
    head = _head()
    head.out.weight.data[:] = 0.0
    head.out.bias.data[:] = 0.0
    f = _feature(np.random.default_rng(0).normal(size=(5, 4)))
    assert score(f, head) == 0.0


def test_score_antisymmetric_head():
    # out weights negated across the two nodes, zero bias -> score = 2 * logit_1
    head = _head(seed=1)
    head.out.weight.data[:, 0] = -head.out.weight.data[:, 1]
    head.out.bias.data[:] = 0.0
    f = _feature(np.random.default_rng(2).normal(size=(6, 4)))
    logits = head_logits(f, head).data
    np.testing.assert_allclose(score(f, head), 2.0 * logits[0, 1], rtol=1e-12)


def test_score_matches_direct_forward():
    head = _head(seed=3)
    x = np.random.default_rng(4).normal(size=(5, 4))
    pooled = np.hstack([x.max(axis=0), x.mean(axis=0)])[None, :]
    hidden = np.maximum(pooled @ head.hidden.weight.data + head.hidden.bias.data, 0.0)
    logits = hidden @ head.out.weight.data + head.out.bias.data
    expected = logits[0, 1] - logits[0, 0]
    assert abs(score(_feature(x), head) - expected) < 1e-12


def test_score_row_permutation_invariant():
    head = _head(seed=5)
    rng = np.random.default_rng(6)
    x = rng.normal(size=(9, 4))
    base = score(_feature(x), head)
    for _ in range(5):
        perm = rng.permutation(9)
        assert score(_feature(x[perm]), head) == base


def test_score_logit_shift_invariant():
    head = _head(seed=7)
    f = _feature(np.random.default_rng(8).normal(size=(5, 4)))
    base = score(f, head)
    head.out.bias.data += 11.5   # same constant on both logits
    np.testing.assert_allclose(score(f, head), base, atol=1e-9)


def test_score_sign_tracks_argmax():
    head = _head(seed=9)
    rng = np.random.default_rng(10)
    for _ in range(20):
        f = _feature(rng.normal(size=(4, 4)) * 3)
        logits = head_logits(f, head).data[0]
        if logits[0] != logits[1]:
            expected_sign = 1.0 if logits.argmax() == 1 else -1.0
            assert np.sign(score(f, head)) == expected_sign


def test_head_shape_validation():
    with pytest.raises(ParameterError):
        HeadParams(
            hidden=AffineLayer(
                weight=Tensor2(np.zeros((8, 3)), requires_grad=True),
                bias=Tensor2(np.zeros((1, 3)), requires_grad=True),
            ),
            out=AffineLayer(
                weight=Tensor2(np.zeros((3, 4)), requires_grad=True),
                bias=Tensor2(np.zeros((1, 4)), requires_grad=True),
            ),
        )
