"""
Ablation - full reader vs. final-layer-only baseline, seed by seed

Both kinds train on the same vocabulary, the same shuffled batches and the
same embedding/encoder init; only the HOS/gate path differs.
"""

import logging
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Sequence

import pandas as pd

from core.encoder import Vocabulary
from pipeline.model import predict
from pipeline.settings import ModelConfig, TrainConfig
from pipeline.trainer import train, trainable_examples
from services.data import MrcExample, references_of
from services.database import RunLedger
from services.metrics import evaluate
from utils.errors import EmptyInputError
from utils.io import atomic_write

logger = logging.getLogger(__name__)

ABLATION_COLUMNS = ["seed", "aba_em", "baseline_em", "delta"]


@dataclass
class AblationRow:
    seed: int
    aba_em: float
    baseline_em: float
    delta: float


def _held_out_em(result, dev: Sequence[MrcExample], batch_size: int) -> float:
    return evaluate(predict(result.model, dev, batch_size), references_of(dev)).em


def run_ablation(train_set: Sequence[MrcExample], dev: Sequence[MrcExample], seeds: Sequence[int],
                 config: ModelConfig, hyper: TrainConfig,
                 ledger: Optional[RunLedger] = None) -> List[AblationRow]:
    if not dev:
        raise EmptyInputError("ablation needs a non-empty held-out split")
    if not seeds:
        raise EmptyInputError("ablation needs at least one seed")

    usable = trainable_examples(train_set, config)
    vocab = Vocabulary.build([e.passage_tokens for e in usable] + [e.question_tokens for e in usable])

    rows: List[AblationRow] = []
    for seed in seeds:
        seeded = replace(config, seed=seed)
        aba = train(usable, seeded, hyper, dev=None, kind="aba", ledger=ledger, vocab=vocab)
        baseline = train(usable, seeded, hyper, dev=None, kind="baseline", ledger=ledger, vocab=vocab)
        aba_em = _held_out_em(aba, dev, hyper.batch_size)
        baseline_em = _held_out_em(baseline, dev, hyper.batch_size)
        row = AblationRow(seed=seed, aba_em=aba_em, baseline_em=baseline_em, delta=aba_em - baseline_em)
        rows.append(row)
        if ledger is not None:
            ledger.record_ablation(seed, aba_em, baseline_em)
        logger.info(f"📊 Seed {seed}: ABA EM {aba_em:.4f}, baseline EM {baseline_em:.4f}, delta {row.delta:+.4f}")

    mean_delta = sum(r.delta for r in rows) / len(rows)
    logger.info(f"✅ Ablation over {len(rows)} seeds: mean delta {mean_delta:+.4f}")
    return rows


def write_ablation_csv(rows: Sequence[AblationRow], path: str) -> None:
    frame = pd.DataFrame([asdict(r) for r in rows], columns=ABLATION_COLUMNS)
    with atomic_write(path) as f:
        frame.to_csv(f, index=False, lineterminator="\n")
