"""
Tests for pipeline.ablation: paired runs, CSV output and the directional check.
"""

import pandas as pd
import pytest

from pipeline.ablation import ABLATION_COLUMNS, AblationRow, run_ablation, write_ablation_csv
from pipeline.settings import ModelConfig, TrainConfig
from services.data import generate_synthetic, hard_task_spec
from services.database import RunLedger
from utils.errors import EmptyInputError


class TestRunAblation:

    def test_one_row_per_seed(self, tmp_path, tiny_config, tiny_train_config, synthetic_corpus):
        ledger = RunLedger(str(tmp_path / "runs.db"))
        rows = run_ablation(synthetic_corpus[:8], synthetic_corpus[8:], [0, 1], tiny_config,
                            tiny_train_config, ledger=ledger)
        assert [r.seed for r in rows] == [0, 1]
        for row in rows:
            assert 0.0 <= row.aba_em <= 1.0 and 0.0 <= row.baseline_em <= 1.0
            assert row.delta == pytest.approx(row.aba_em - row.baseline_em)

        ledger.flush()
        stats = ledger.get_stats()
        assert stats["runs"] == 4
        assert stats["ablation_seeds"] == 2

    def test_deterministic(self, tiny_config, tiny_train_config, synthetic_corpus):
        first = run_ablation(synthetic_corpus[:8], synthetic_corpus[8:], [3], tiny_config, tiny_train_config)
        second = run_ablation(synthetic_corpus[:8], synthetic_corpus[8:], [3], tiny_config, tiny_train_config)
        assert first == second

    def test_needs_dev_and_seeds(self, tiny_config, tiny_train_config, synthetic_corpus):
        with pytest.raises(EmptyInputError):
            run_ablation(synthetic_corpus, [], [0], tiny_config, tiny_train_config)
        with pytest.raises(EmptyInputError):
            run_ablation(synthetic_corpus, synthetic_corpus, [], tiny_config, tiny_train_config)


def test_csv(tmp_path):
    path = tmp_path / "ablation.csv"
    write_ablation_csv([AblationRow(0, 0.5, 0.25, 0.25), AblationRow(1, 0.5, 0.75, -0.25)], str(path))
    frame = pd.read_csv(path)
    assert list(frame.columns) == ABLATION_COLUMNS
    assert frame["delta"].tolist() == [0.25, -0.25]


@pytest.mark.slow
def test_hos_gate_helps_on_hard_task():
    corpus = generate_synthetic(hard_task_spec(seed=0), 2400)
    train_set, dev = corpus[:2000], corpus[2000:]
    config = ModelConfig(d=64, d_ff=128, n=4, dropout=0.1, max_passage_len=64,
                         max_question_len=16, max_answer_len=5)
    rows = run_ablation(train_set, dev, [0, 1, 2], config, TrainConfig(epochs=15, lr=1e-3, batch_size=16))
    assert sum(r.delta for r in rows) / len(rows) >= 0.0
