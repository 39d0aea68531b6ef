"""
Trainer - Span-loss minimization with Adam

Loop per epoch:
1. Shuffle the trainable examples (seeded, so both model kinds see the same batches)
2. forward -> mean span loss over the batch -> backward -> clip -> Adam step
3. Score the dev split (EM/F1) with the same predict() the CLI uses

A non-finite loss or gradient norm aborts with DivergenceError.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.encoder import Vocabulary
from core.predictor import span_loss
from core.tensor import Rng, Tensor, add, backward, scale, zero_grad
from pipeline.checkpoint import Checkpoint
from pipeline.model import ReaderModel, build_model, gold_span, make_batch, predict
from pipeline.settings import ModelConfig, TrainConfig
from services.data import MrcExample, references_of
from services.database import RunLedger
from services.metrics import evaluate
from utils.errors import DivergenceError, EmptyInputError
from utils.io import atomic_write

logger = logging.getLogger(__name__)

_SHUFFLE_STREAM = 10
_DROPOUT_STREAM = 11

METRICS_COLUMNS = ["epoch", "loss", "dev_em", "dev_f1"]


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    dev_em: Optional[float] = None
    dev_f1: Optional[float] = None


@dataclass
class TrainResult:
    model: ReaderModel
    checkpoint: Checkpoint
    history: List[EpochRecord] = field(default_factory=list)
    steps: int = 0

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.history[-1] if self.history else None


class Adam:
    """Adam over a named parameter set, with global-norm gradient clipping."""

    def __init__(self, params: Dict[str, Tensor], hyper: TrainConfig):
        self.params = params
        self.lr = hyper.lr
        self.beta1 = hyper.beta1
        self.beta2 = hyper.beta2
        self.eps = hyper.eps
        self.clip_norm = hyper.clip_norm
        self.t = 0
        self.m = {name: np.zeros(p.shape) for name, p in params.items()}
        self.v = {name: np.zeros(p.shape) for name, p in params.items()}

    def grad_norm(self) -> float:
        total = sum(float(np.sum(p.grad * p.grad)) for p in self.params.values() if p.grad is not None)
        return math.sqrt(total)

    def step(self) -> float:
        """Apply one update; returns the pre-clipping gradient norm."""
        norm = self.grad_norm()
        self.t += 1
        if self.lr == 0.0:
            return norm
        clip = self.clip_norm / norm if norm > self.clip_norm else 1.0
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * clip
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return norm


def truncated_length(example: MrcExample, config: ModelConfig) -> int:
    return min(example.passage_len, config.max_passage_len)


def trainable_examples(examples: Sequence[MrcExample], config: ModelConfig) -> List[MrcExample]:
    kept = [e for e in examples if gold_span(e, truncated_length(e, config)) is not None]
    skipped = len(examples) - len(kept)
    if skipped:
        logger.warning(f"Skipping {skipped} examples with no usable gold span")
    return kept


def batch_loss(model: ReaderModel, batch_examples: Sequence[MrcExample],
               training: bool, rng: Optional[Rng]) -> Tensor:
    """Mean span loss over a batch."""
    batch = make_batch(batch_examples, model.vocab, model.config)
    out = model.forward(batch, training=training, rng=rng)
    total: Optional[Tensor] = None
    for example, begin, end, length in zip(batch.examples, out.begin_logits, out.end_logits,
                                           out.passage_lengths):
        gold_begin, gold_end = gold_span(example, length)
        loss = span_loss(begin, end, gold_begin, gold_end)
        total = loss if total is None else add(total, loss)
    return scale(total, 1.0 / len(batch))


def _run_id(kind: str, seed: int) -> str:
    return f"{kind}-{seed}-{int(time.time() * 1000)}"


def train(corpus: Sequence[MrcExample], config: ModelConfig, hyper: TrainConfig,
          dev: Optional[Sequence[MrcExample]] = None, kind: str = "aba",
          ledger: Optional[RunLedger] = None, vocab: Optional[Vocabulary] = None) -> TrainResult:
    """
    Train a fresh model on corpus.

    Args:
        corpus: Training examples (non-trainable ones are skipped)
        config: Architecture; config.seed fixes init, shuffling and dropout
        hyper: Optimizer and schedule settings
        dev: Held-out examples scored after every epoch
        kind: "aba" or "baseline"
        ledger: Optional run ledger; events are buffered, caller flushes
        vocab: Reuse a vocabulary (ablation runs share one); built from corpus otherwise
    """
    examples = trainable_examples(corpus, config)
    if not examples:
        raise EmptyInputError("training corpus has no trainable examples")

    if vocab is None:
        vocab = Vocabulary.build([e.passage_tokens for e in examples] + [e.question_tokens for e in examples])
    model = build_model(config, vocab, kind)
    optimizer = Adam(model.params, hyper)

    root = Rng(config.seed)
    shuffle_rng = root.child(_SHUFFLE_STREAM)
    dropout_rng = root.child(_DROPOUT_STREAM)

    run_id = _run_id(kind, config.seed)
    if ledger is not None:
        ledger.record_run_start(run_id, kind, config.seed,
                                {"model": config.to_dict(), "train": asdict(hyper)})

    logger.info(f"🚀 Training {kind}: {len(examples)} examples, {hyper.epochs} epochs, "
                f"batch {hyper.batch_size}, lr {hyper.lr}")

    history: List[EpochRecord] = []
    step = 0
    try:
        for epoch in range(1, hyper.epochs + 1):
            order = shuffle_rng.permutation(len(examples))
            weighted_loss = 0.0
            for start in range(0, len(order), hyper.batch_size):
                chunk = [examples[int(i)] for i in order[start:start + hyper.batch_size]]
                loss = batch_loss(model, chunk, training=True, rng=dropout_rng)
                value = loss.item()
                step += 1
                if not math.isfinite(value):
                    raise DivergenceError(step, value, f"epoch {epoch}")

                zero_grad(model.parameters())
                backward(loss)
                norm = optimizer.step()
                if not math.isfinite(norm):
                    raise DivergenceError(step, value, f"gradient norm {norm}")
                weighted_loss += value * len(chunk)
                logger.debug(f"step {step}: loss {value:.6f}, grad norm {norm:.4f}")

            record = EpochRecord(epoch=epoch, loss=weighted_loss / len(examples))
            if dev:
                result = evaluate(predict(model, dev, hyper.batch_size), references_of(dev))
                record.dev_em, record.dev_f1 = result.em, result.f1
                logger.info(f"📊 Epoch {epoch}/{hyper.epochs}: loss {record.loss:.4f}, "
                            f"dev EM {result.em:.4f}, F1 {result.f1:.4f}")
            else:
                logger.info(f"📊 Epoch {epoch}/{hyper.epochs}: loss {record.loss:.4f}")
            history.append(record)
            if ledger is not None:
                ledger.record_epoch(run_id, epoch, record.loss, record.dev_em, record.dev_f1)

    except DivergenceError as e:
        logger.error(f"🚨 Training diverged: {e}")
        if ledger is not None:
            ledger.record_run_end(run_id, "DIVERGED", step)
        raise

    if ledger is not None:
        ledger.record_run_end(run_id, "COMPLETED", step)
    zero_grad(model.parameters())
    logger.info(f"✅ Training finished after {step} steps")
    return TrainResult(model=model, checkpoint=Checkpoint.from_model(model, step), history=history, steps=step)


def write_metrics_csv(history: Sequence[EpochRecord], path: str) -> None:
    """epoch,loss,dev_em,dev_f1; dev columns are empty without a dev split."""
    frame = pd.DataFrame([asdict(r) for r in history], columns=METRICS_COLUMNS)
    with atomic_write(path) as f:
        frame.to_csv(f, index=False, lineterminator="\n")
