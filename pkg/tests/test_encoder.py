"""
Tests for core.encoder: vocabulary, embeddings, encoder blocks and cross attention.
"""

import numpy as np
import numpy.testing as npt
import pytest

from core.encoder import (
    NO_ANSWER_TOKEN, PAD_TOKEN, SPECIAL_TOKENS, UNK_TOKEN, EmbeddingTable, EncoderBlock, Vocabulary,
    add_positions, apply_block, cross_attend, embed, encode_stack, init_embedding, init_encoder_block,
    sinusoidal_positions,
)
from core.tensor import Rng, Tensor, backward, constant, elementwise_mul, parameter, sum_all
from tests.gradcheck import assert_gradients_match
from utils.errors import ConfigurationError, DimensionError, VocabularyError


def weighted_total(out: Tensor, weights: np.ndarray) -> Tensor:
    return sum_all(elementwise_mul(out, constant(weights)))


class TestVocabulary:

    def test_special_ids(self):
        vocab = Vocabulary.build([["b", "a", "b"]])
        assert vocab.tokens[:3] == [PAD_TOKEN, UNK_TOKEN, NO_ANSWER_TOKEN]
        assert (Vocabulary.PAD, Vocabulary.UNK, Vocabulary.NO_ANSWER) == (0, 1, 2)

    def test_frequency_then_token_order(self):
        vocab = Vocabulary.build([["c", "b", "a", "b", "c"], ["a", "c"]])
        assert vocab.tokens[3:] == ["c", "a", "b"]

    def test_min_freq(self):
        vocab = Vocabulary.build([["x", "y", "y"]], min_freq=2)
        assert vocab.tokens[3:] == ["y"]

    def test_unknown_tokens_map_to_unk(self):
        vocab = Vocabulary.build([["a"]])
        assert vocab.encode(["a", "zzz", NO_ANSWER_TOKEN]) == [3, Vocabulary.UNK, Vocabulary.NO_ANSWER]

    def test_round_trip_list(self):
        vocab = Vocabulary.build([["q", "r"]])
        assert Vocabulary.from_list(vocab.to_list()).tokens == vocab.tokens

    def test_missing_specials(self):
        with pytest.raises(VocabularyError):
            Vocabulary(["a", "b", "c"])
        with pytest.raises(VocabularyError):
            Vocabulary(list(SPECIAL_TOKENS) + ["a", "a"])


class TestEmbedding:

    def test_embed_rows(self):
        table = init_embedding(6, 4, Rng(0))
        out = embed([3, 0, 5], table)
        assert out.shape == (3, 4)
        npt.assert_array_equal(out.data[0], table.weights.data[3])
        npt.assert_array_equal(out.data[1], 0.0)

    def test_init_bounds_and_pad_row(self):
        table = init_embedding(10, 16, Rng(1))
        assert np.abs(table.weights.data).max() <= 0.25
        npt.assert_array_equal(table.weights.data[Vocabulary.PAD], 0.0)

    def test_out_of_vocabulary_id(self):
        table = init_embedding(4, 2, Rng(0))
        with pytest.raises(VocabularyError):
            embed([1, 4], table)
        with pytest.raises(VocabularyError):
            embed([-1], table)

    def test_sinusoidal_positions(self):
        table = sinusoidal_positions(5, 6)
        assert table.shape == (5, 6)
        npt.assert_array_equal(table[0, 0::2], 0.0)
        npt.assert_array_equal(table[0, 1::2], 1.0)

    def test_add_positions_is_constant_offset(self):
        x = parameter(np.zeros((3, 4)))
        npt.assert_array_equal(add_positions(x).data, sinusoidal_positions(3, 4))


class TestEncoderStack:

    def test_one_output_per_block(self, np_rng):
        blocks = [init_encoder_block(4, 8, Rng(s)) for s in range(3)]
        x = constant(np_rng.normal(size=(5, 4)))
        outputs = encode_stack(x, blocks, [True] * 5)
        assert len(outputs) == 3
        assert all(o.shape == (5, 4) for o in outputs)

    def test_no_blocks(self, np_rng):
        x = constant(np_rng.normal(size=(2, 4)))
        assert encode_stack(x, [], [True, True]) == []

    def test_invalid_blocks(self, np_rng):
        x = constant(np_rng.normal(size=(2, 4)))
        with pytest.raises(ConfigurationError):
            encode_stack(x, None, [True, True])
        with pytest.raises(ConfigurationError):
            encode_stack(x, ["not a block"], [True, True])

    def test_mask_length(self, np_rng):
        x = constant(np_rng.normal(size=(3, 4)))
        with pytest.raises(DimensionError):
            encode_stack(x, [init_encoder_block(4, 8, Rng(0))], [True, True])

    def test_width_mismatch(self, np_rng):
        with pytest.raises(DimensionError):
            apply_block(constant(np_rng.normal(size=(3, 6))), init_encoder_block(4, 8, Rng(0)), [True] * 3)

    def test_padding_does_not_change_real_positions(self, np_rng):
        block = init_encoder_block(4, 8, Rng(2))
        real = np_rng.normal(size=(3, 4))
        padded = np.vstack([real, np_rng.normal(size=(2, 4))])
        alone = apply_block(constant(real), block, [True] * 3).data
        with_pad = apply_block(constant(padded), block, [True, True, True, False, False]).data
        npt.assert_allclose(with_pad[:3], alone, atol=1e-12)

    def test_named_parameters_round_trip(self):
        block = init_encoder_block(4, 8, Rng(0))
        named = block.named_parameters("encoder.0")
        assert sorted(named) == sorted(f"encoder.0.{n}" for n in EncoderBlock.PARAM_NAMES)
        rebuilt = EncoderBlock.from_named(named, "encoder.0")
        assert rebuilt.wq is block.wq

    def test_block_gradients(self, np_rng):
        block = init_encoder_block(4, 6, Rng(4))
        x = parameter(np_rng.normal(size=(4, 4)))
        mask = [True, True, True, False]
        w = np_rng.normal(size=(4, 4))
        params = [x] + [getattr(block, n) for n in EncoderBlock.PARAM_NAMES]
        assert_gradients_match(lambda: weighted_total(apply_block(x, block, mask), w), params)

    def test_every_parameter_gets_gradient(self, np_rng):
        blocks = [init_encoder_block(4, 8, Rng(s)) for s in range(2)]
        x_p = constant(np_rng.normal(size=(6, 4)))
        x_q = constant(np_rng.normal(size=(3, 4)))
        p_mask, q_mask = [True] * 5 + [False], [True] * 3
        c_p = encode_stack(x_p, blocks, p_mask)
        c_q = encode_stack(x_q, blocks, q_mask)
        cross = cross_attend(c_p[-1], c_q[-1], p_mask, q_mask)
        outputs = c_p + c_q + [cross.a_p, cross.a_q]
        total = weighted_total(outputs[0], np_rng.normal(size=outputs[0].shape))
        for out in outputs[1:]:
            total = total + weighted_total(out, np_rng.normal(size=out.shape))
        backward(total)
        for block in blocks:
            for name in EncoderBlock.PARAM_NAMES:
                grad = getattr(block, name).grad
                assert grad is not None and np.any(grad != 0.0), name


class TestCrossAttention:

    def test_shapes(self, np_rng):
        c_p = constant(np_rng.normal(size=(5, 4)))
        c_q = constant(np_rng.normal(size=(3, 4)))
        out = cross_attend(c_p, c_q, [True] * 5, [True] * 3)
        assert out.a_p.shape == (5, 4)
        assert out.a_q.shape == (3, 4)

    def test_masked_question_positions_are_ignored(self, np_rng):
        c_p = constant(np_rng.normal(size=(2, 4)))
        q = np_rng.normal(size=(3, 4))
        short = cross_attend(c_p, constant(q[:2]), [True, True], [True, True]).a_p.data
        masked = cross_attend(c_p, constant(q), [True, True], [True, True, False]).a_p.data
        npt.assert_allclose(masked, short, atol=1e-12)

    def test_width_mismatch(self, np_rng):
        with pytest.raises(DimensionError):
            cross_attend(constant(np.ones((2, 4))), constant(np.ones((2, 3))), [True] * 2, [True] * 2)

    def test_gradients(self, np_rng):
        c_p = parameter(np_rng.normal(size=(3, 4)))
        c_q = parameter(np_rng.normal(size=(2, 4)))
        w_p = np_rng.normal(size=(3, 4))
        w_q = np_rng.normal(size=(2, 4))

        def loss():
            out = cross_attend(c_p, c_q, [True] * 3, [True] * 2)
            return sum_all(elementwise_mul(out.a_p, constant(w_p))) + sum_all(elementwise_mul(out.a_q, constant(w_q)))

        assert_gradients_match(loss, [c_p, c_q])


def test_embedding_table_dims():
    table = EmbeddingTable(parameter(np.zeros((7, 3))))
    assert (table.vocab_size, table.d) == (7, 3)
