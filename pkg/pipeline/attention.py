"""
Attention dump - passage-to-question weights (row-softmaxed H) as JSON

    {"rows": l, "cols": m, "passage_tokens": [...], "question_tokens": [...],
     "weights": [l*m floats, row-major, 6 decimals]}

Padding never appears: the example is run alone, so l and m are its
real lengths.
"""

import logging
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from pipeline.checkpoint import Checkpoint
from pipeline.model import ReaderModel, make_batch
from services.data import MrcExample
from utils.errors import ParseError, SchemaError
from utils.io import read_json, write_json

logger = logging.getLogger(__name__)

DECIMALS = 6


@dataclass
class AttentionDump:
    passage_tokens: List[str]
    question_tokens: List[str]
    weights: np.ndarray  # l x m

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    def to_dict(self):
        return {
            "rows": self.rows,
            "cols": self.cols,
            "passage_tokens": list(self.passage_tokens),
            "question_tokens": list(self.question_tokens),
            "weights": round_rows(self.weights, DECIMALS).reshape(-1).tolist(),
        }


def round_rows(weights: np.ndarray, decimals: int) -> np.ndarray:
    """
    Round each row to `decimals` places with largest-remainder rounding,
    so a row that sums to 1 still sums to exactly 1 in those units.
    """
    unit = 10 ** decimals
    scaled = weights * unit
    units = np.floor(scaled)
    remainders = scaled - units
    for row in range(weights.shape[0]):
        missing = int(np.clip(round(unit - units[row].sum()), 0, weights.shape[1]))
        if missing:
            # Ties go to the earlier column
            top = np.argsort(-remainders[row], kind="stable")[:missing]
            units[row, top] += 1.0
    return units / unit

def attention_of(model: ReaderModel, example: MrcExample) -> AttentionDump:
    batch = make_batch([example], model.vocab, model.config)
    out = model.forward(batch, training=False)
    l, m = batch.passage_lengths[0], batch.question_lengths[0]
    weights = out.bundles[0].H_row.data[:l, :m]
    passage = example.passage_tokens
    if len(passage) > l:
        passage = passage[:l - 1] + passage[-1:]
    question = example.question_tokens[:m] or [model.vocab.tokens[model.vocab.UNK]]
    return AttentionDump(passage_tokens=passage, question_tokens=question, weights=weights)


def dump_attention(source: Union[Checkpoint, ReaderModel], example: MrcExample, out_path: str) -> AttentionDump:
    """Run one example and write its H_row matrix with token labels to out_path."""
    model = source.to_model() if isinstance(source, Checkpoint) else source
    dump = attention_of(model, example)
    write_json(out_path, dump.to_dict())
    logger.info(f"💾 Attention for {example.id} ({dump.rows}x{dump.cols}) written to {out_path}")
    return dump


def load_attention_dump(path: str) -> AttentionDump:
    payload = read_json(path)
    for name in ("rows", "cols", "passage_tokens", "question_tokens", "weights"):
        if name not in payload:
            raise SchemaError(name, path)
    rows, cols = int(payload["rows"]), int(payload["cols"])
    weights = np.asarray(payload["weights"], dtype=np.float64)
    if weights.size != rows * cols:
        raise ParseError(path, f"{weights.size} weights for a {rows}x{cols} matrix")
    if len(payload["passage_tokens"]) != rows or len(payload["question_tokens"]) != cols:
        raise ParseError(path, "token label counts do not match the matrix shape")
    return AttentionDump(
        passage_tokens=list(payload["passage_tokens"]),
        question_tokens=list(payload["question_tokens"]),
        weights=weights.reshape(rows, cols),
    )
