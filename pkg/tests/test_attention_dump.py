"""
Tests for pipeline.attention: dumped weights, labels and the JSON round trip.
"""

import json

import numpy as np
import pytest

from core.encoder import Vocabulary
from pipeline.attention import DECIMALS, attention_of, dump_attention, load_attention_dump, round_rows
from pipeline.checkpoint import Checkpoint
from pipeline.model import build_model
from pipeline.settings import ModelConfig
from pipeline.trainer import train
from tests.test_model import make_example
from utils.errors import ParseError, SchemaError


@pytest.fixture
def trained(tiny_config, tiny_train_config, synthetic_corpus):
    return train(synthetic_corpus, tiny_config, tiny_train_config)


class TestDump:

    def test_rows_sum_to_one_after_rounding(self, trained, synthetic_corpus, tmp_path):
        path = str(tmp_path / "attn.json")
        dump = dump_attention(trained.checkpoint, synthetic_corpus[0], path)
        np.testing.assert_allclose(dump.weights.sum(axis=1), 1.0, atol=1e-12)
        loaded = load_attention_dump(path)
        np.testing.assert_allclose(loaded.weights.sum(axis=1), 1.0, atol=1e-6)

    def test_long_question_rows_still_sum_to_one(self, tmp_path):
        passage = [f"w{i % 7}" for i in range(18)]
        question = [f"w{i % 5}" for i in range(13)]
        example = make_example("long", passage, question, span=(2, 3))
        config = ModelConfig(d=8, d_ff=16, n=2, max_passage_len=32, max_question_len=16, seed=3)
        model = build_model(config, Vocabulary.build([example.passage_tokens, question]))
        path = str(tmp_path / "attn.json")
        dump_attention(model, example, path)
        loaded = load_attention_dump(path)
        assert loaded.cols == 13
        assert np.abs(loaded.weights.sum(axis=1) - 1.0).max() <= 1e-6

    def test_labels_match_lengths(self, trained, synthetic_corpus, tmp_path):
        example = synthetic_corpus[3]
        path = tmp_path / "attn.json"
        dump = dump_attention(trained.model, example, str(path))
        payload = json.loads(path.read_text())
        assert payload["rows"] == example.passage_len == len(payload["passage_tokens"])
        assert payload["cols"] == len(example.question_tokens) == len(payload["question_tokens"])
        assert len(payload["weights"]) == dump.rows * dump.cols

    def test_round_trip(self, trained, synthetic_corpus, tmp_path):
        path = str(tmp_path / "attn.json")
        dump = dump_attention(trained.checkpoint, synthetic_corpus[1], path)
        loaded = load_attention_dump(path)
        assert loaded.passage_tokens == dump.passage_tokens
        assert loaded.question_tokens == dump.question_tokens
        np.testing.assert_allclose(loaded.weights, dump.weights, atol=10 ** -DECIMALS)
        assert loaded.to_dict() == dump.to_dict()

    def test_truncated_passage_keeps_no_answer_label(self, synthetic_corpus):
        config = ModelConfig(d=4, d_ff=8, n=1, max_passage_len=5, max_question_len=16)
        example = synthetic_corpus[0]
        model = build_model(config, Vocabulary.build([example.passage_tokens, example.question_tokens]))
        dump = attention_of(model, example)
        assert dump.rows == 5
        assert dump.passage_tokens[-1] == example.passage_tokens[-1]

    def test_checkpoint_and_model_agree(self, trained, synthetic_corpus):
        from_model = attention_of(trained.model, synthetic_corpus[2])
        from_ckpt = attention_of(Checkpoint.from_model(trained.model, 0).to_model(), synthetic_corpus[2])
        np.testing.assert_array_equal(from_model.weights, from_ckpt.weights)


class TestRoundRows:

    def test_largest_remainders_get_the_missing_units(self):
        weights = np.array([[0.3333334, 0.3333333, 0.3333333], [0.25, 0.25, 0.5]])
        rounded = round_rows(weights, 6)
        np.testing.assert_allclose(rounded, [[0.333334, 0.333333, 0.333333], [0.25, 0.25, 0.5]], atol=1e-15)

    def test_many_columns(self, np_rng):
        weights = np_rng.random((20, 40))
        weights /= weights.sum(axis=1, keepdims=True)
        rounded = round_rows(weights, 6)
        np.testing.assert_allclose(rounded.sum(axis=1), 1.0, atol=1e-9)
        assert np.abs(rounded - weights).max() < 1e-6
        np.testing.assert_array_equal(round_rows(rounded, 6), rounded)


class TestLoader:

    def test_missing_field(self, tmp_path):
        path = tmp_path / "attn.json"
        path.write_text(json.dumps({"rows": 1, "cols": 1, "passage_tokens": ["a"], "question_tokens": ["b"]}))
        with pytest.raises(SchemaError, match="weights"):
            load_attention_dump(str(path))

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "attn.json"
        path.write_text(json.dumps({"rows": 2, "cols": 1, "passage_tokens": ["a", "b"],
                                    "question_tokens": ["q"], "weights": [1.0]}))
        with pytest.raises(ParseError, match="2x1"):
            load_attention_dump(str(path))

    def test_not_json(self, tmp_path):
        path = tmp_path / "attn.json"
        path.write_text("[1, 2")
        with pytest.raises(ParseError):
            load_attention_dump(str(path))
