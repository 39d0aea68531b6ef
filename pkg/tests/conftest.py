"""
Shared fixtures for the reader test suite.

Slow acceptance runs are marked @pytest.mark.slow and only run with
ABA_RUN_SLOW=1.
"""

import json
import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from pipeline.settings import ModelConfig, TrainConfig  # noqa: E402
from services.data import SynthTaskSpec, generate_synthetic  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance run, needs ABA_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("ABA_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set ABA_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


SQUAD_FIXTURE = {
    "version": "v2.0",
    "data": [
        {
            "title": "Basketball",
            "paragraphs": [
                {
                    "context": "Michael Jordan played for the Chicago Bulls. He won six titles.",
                    "qas": [
                        {
                            "id": "q-team",
                            "question": "Which team did Jordan play for?",
                            "answers": [{"text": "the Chicago Bulls", "answer_start": 26}],
                            "is_impossible": False,
                        },
                        {
                            "id": "q-titles",
                            "question": "How many titles did he win?",
                            "answers": [{"text": "six", "answer_start": 52}],
                            "is_impossible": False,
                        },
                        {
                            "id": "q-coach",
                            "question": "Who coached the Lakers?",
                            "answers": [],
                            "is_impossible": True,
                        },
                    ],
                }
            ],
        }
    ],
}


@pytest.fixture
def np_rng():
    """Seeded numpy generator for random test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def squad_file(tmp_path):
    path = tmp_path / "squad.json"
    path.write_text(json.dumps(SQUAD_FIXTURE), encoding="utf-8")
    return str(path)


@pytest.fixture
def tiny_config():
    return ModelConfig(d=4, d_ff=8, n=2, dropout=0.0, max_passage_len=64,
                       max_question_len=16, max_answer_len=5, seed=0)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(epochs=2, lr=1e-2, batch_size=4)


@pytest.fixture
def tiny_spec():
    return SynthTaskSpec(vocab_size=10, passage_len_range=(8, 12), seed=0)


@pytest.fixture
def synthetic_corpus(tiny_spec):
    return generate_synthetic(tiny_spec, 12)
