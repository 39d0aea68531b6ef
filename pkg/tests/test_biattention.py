"""
Tests for core.biattention: trilinear similarity, both softmaxes, M, S and fusion.
"""

import numpy as np
import numpy.testing as npt
import pytest

from core.biattention import (
    TrilinearWeights, bidirectional_attention, fuse, init_trilinear, p2q_attention, q2p_attention,
    similarity,
)
from core.tensor import MASK_VALUE, Rng, constant, elementwise_mul, parameter, softmax_cols, softmax_rows, sum_all
from tests.gradcheck import assert_gradients_match
from utils.errors import DimensionError


def explicit_similarity(p, q, w):
    l, m = p.shape[0], q.shape[0]
    H = np.zeros((l, m))
    for i in range(l):
        for j in range(m):
            H[i, j] = w @ np.concatenate([p[i], q[j], p[i] * q[j]])
    return H


class TestSimilarity:

    def test_matches_explicit_trilinear_form(self, np_rng):
        for _ in range(20):
            l, m, D = (int(x) for x in np_rng.integers(1, 6, size=3))
            p, q, w = np_rng.normal(size=(l, D)), np_rng.normal(size=(m, D)), np_rng.normal(size=3 * D)
            H = similarity(constant(p), constant(q), TrilinearWeights(constant(w))).data
            npt.assert_allclose(H, explicit_similarity(p, q, w), atol=1e-12)

    def test_masked_pairs(self, np_rng):
        p, q = constant(np_rng.normal(size=(3, 2))), constant(np_rng.normal(size=(2, 2)))
        H = similarity(p, q, init_trilinear(2, Rng(0)), p_mask=[True, True, False], q_mask=[True, False]).data
        assert H[2, 0] == MASK_VALUE and H[0, 1] == MASK_VALUE
        assert H[0, 0] != MASK_VALUE

    def test_width_mismatch(self, np_rng):
        with pytest.raises(DimensionError):
            similarity(constant(np.ones((2, 3))), constant(np.ones((2, 4))), init_trilinear(3, Rng(0)))
        with pytest.raises(DimensionError):
            similarity(constant(np.ones((2, 3))), constant(np.ones((2, 3))), init_trilinear(4, Rng(0)))

    def test_dropout_only_while_training(self, np_rng):
        p, q = constant(np_rng.normal(size=(6, 3))), constant(np_rng.normal(size=(5, 3)))
        w = init_trilinear(3, Rng(1))
        plain = similarity(p, q, w).data
        npt.assert_array_equal(similarity(p, q, w, rate=0.5, training=False).data, plain)
        dropped = similarity(p, q, w, rate=0.5, training=True, rng=Rng(2)).data
        assert not np.array_equal(dropped, plain)
        survivors = dropped != 0
        npt.assert_allclose(dropped[survivors], 2.0 * plain[survivors])


class TestStochasticity:

    def test_rows_and_columns_sum_to_one(self, np_rng):
        for _ in range(1000):
            l, m = (int(x) for x in np_rng.integers(1, 8, size=2))
            H = np_rng.normal(size=(l, m)) * 5
            p_keep = np_rng.random(l) > 0.3
            q_keep = np_rng.random(m) > 0.3
            p_keep[0] = q_keep[0] = True
            H[~(p_keep[:, None] & q_keep[None, :])] = MASK_VALUE
            H_row = softmax_rows(constant(H)).data
            H_col = softmax_cols(constant(H)).data
            npt.assert_allclose(H_row.sum(axis=1), 1.0, atol=1e-9)
            npt.assert_allclose(H_col.sum(axis=0), 1.0, atol=1e-9)
            assert np.all(H_row >= 0) and np.all(H_col >= 0)


class TestAttention:

    def test_zero_weights_give_uniform_rows(self, np_rng):
        p, q = constant(np_rng.normal(size=(4, 3))), constant(np_rng.normal(size=(5, 3)))
        bundle = bidirectional_attention(p, q, TrilinearWeights(constant(np.zeros(9))))
        npt.assert_allclose(bundle.H_row.data, np.full((4, 5), 0.2), atol=1e-15)

    def test_shapes(self, np_rng):
        p, q = constant(np_rng.normal(size=(4, 3))), constant(np_rng.normal(size=(2, 3)))
        bundle = bidirectional_attention(p, q, init_trilinear(3, Rng(0)))
        assert bundle.H.shape == (4, 2)
        assert bundle.M.shape == (4, 3) and bundle.S.shape == (4, 3)
        assert bundle.fused.I.shape == (4, 12) and bundle.fused.D == 3

    def test_m_and_s_formulas(self, np_rng):
        p, q = np_rng.normal(size=(4, 3)), np_rng.normal(size=(2, 3))
        bundle = bidirectional_attention(constant(p), constant(q), init_trilinear(3, Rng(5)))
        H_row, H_col = bundle.H_row.data, bundle.H_col.data
        npt.assert_allclose(bundle.M.data, H_row @ q, atol=1e-12)
        npt.assert_allclose(bundle.S.data, H_row @ H_col.T @ p, atol=1e-12)
        npt.assert_allclose(bundle.fused.I.data,
                            np.hstack([p, H_row @ q, p * (H_row @ q), p * (H_row @ H_col.T @ p)]), atol=1e-12)

    def test_operand_checks(self, np_rng):
        H_row = constant(np.full((3, 2), 0.5))
        with pytest.raises(DimensionError):
            p2q_attention(H_row, constant(np.ones((3, 4))))
        with pytest.raises(DimensionError):
            q2p_attention(H_row, constant(np.full((2, 2), 0.5)), constant(np.ones((3, 4))))
        with pytest.raises(DimensionError):
            fuse(constant(np.ones((3, 4))), constant(np.ones((3, 4))), constant(np.ones((2, 4))))

    def test_permuting_question_permutes_columns(self, np_rng):
        for _ in range(20):
            l, m, D = (int(x) for x in np_rng.integers(1, 6, size=3))
            p, q = np_rng.normal(size=(l, D)), np_rng.normal(size=(m, D))
            w = init_trilinear(D, Rng(int(np_rng.integers(0, 100))))
            order = np_rng.permutation(m)
            plain = bidirectional_attention(constant(p), constant(q), w)
            shuffled = bidirectional_attention(constant(p), constant(q[order]), w)
            npt.assert_allclose(shuffled.H.data, plain.H.data[:, order], atol=1e-12)
            npt.assert_allclose(shuffled.M.data, plain.M.data, atol=1e-12)

    def test_m_stays_inside_question_range(self, np_rng):
        for _ in range(200):
            l, m, D = (int(x) for x in np_rng.integers(1, 7, size=3))
            q = np_rng.normal(size=(m, D)) * 3
            bundle = bidirectional_attention(constant(np_rng.normal(size=(l, D))), constant(q),
                                             TrilinearWeights(constant(np_rng.normal(size=3 * D) * 4)))
            M = bundle.M.data
            assert np.all(M >= q.min(axis=0) - 1e-12)
            assert np.all(M <= q.max(axis=0) + 1e-12)

    def test_single_tokens_give_s_equal_p(self, np_rng):
        p, q = np_rng.normal(size=(1, 5)), np_rng.normal(size=(1, 5))
        bundle = bidirectional_attention(constant(p), constant(q), init_trilinear(5, Rng(2)))
        npt.assert_array_equal(bundle.H_row.data, [[1.0]])
        npt.assert_array_equal(bundle.S.data, p)


class TestAttentionGradients:

    def test_random_cases(self, np_rng):
        for _ in range(100):
            l, m = (int(x) for x in np_rng.integers(1, 6, size=2))
            D = int(np_rng.integers(1, 4))
            p = parameter(np_rng.normal(size=(l, D)))
            q = parameter(np_rng.normal(size=(m, D)))
            w = TrilinearWeights(parameter(np_rng.normal(size=3 * D)))
            p_mask = np_rng.random(l) > 0.25
            q_mask = np_rng.random(m) > 0.25
            p_mask[0] = q_mask[0] = True
            readout = np_rng.normal(size=(l, 4 * D))

            def loss():
                bundle = bidirectional_attention(p, q, w, p_mask, q_mask)
                return sum_all(elementwise_mul(bundle.fused.I, constant(readout)))

            assert_gradients_match(loss, [p, q, w.w])
