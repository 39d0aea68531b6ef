"""
ReaderModel - Wiring of the full reader and of the ablation baseline

forward():          E -> C^1..C^n -> A -> HOS -> gate -> H, H_row, H_col, M, S -> I -> span logits
forward_baseline(): same path, but the bidirectional attention reads only A
                    (no history-of-semantic stack, no gate)

Batches are padded to their longest passage/question; each example is run
as its own graph, padded positions masked everywhere.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.biattention import AttentionBundle, TrilinearWeights, bidirectional_attention, init_trilinear
from core.encoder import (
    EmbeddingTable, EncoderBlock, Vocabulary, add_positions, cross_attend, embed,
    encode_stack, init_embedding, init_encoder_block,
)
from core.hos import GateMatrix, apply_gate, build_hos, init_gate
from core.predictor import (
    SpanHead, SpanPrediction, decode_span, init_span_head, span_logits, span_text,
)
from core.tensor import Rng, Tensor
from pipeline.settings import ModelConfig
from services.data import MrcExample
from utils.errors import ConfigurationError, ForwardError, ReaderError

logger = logging.getLogger(__name__)

KINDS = ("aba", "baseline")

# Independent init streams so both model kinds share embedding/encoder init
_EMBEDDING_STREAM = 1
_ENCODER_STREAM = 2
_TRILINEAR_STREAM = 3
_HEAD_STREAM = 4


@dataclass
class Batch:
    examples: List[MrcExample]
    passage_ids: np.ndarray      # B x l_max
    question_ids: np.ndarray     # B x m_max
    passage_mask: np.ndarray     # B x l_max, True on real tokens
    question_mask: np.ndarray    # B x m_max
    passage_lengths: List[int]
    question_lengths: List[int]

    def __len__(self) -> int:
        return len(self.examples)


@dataclass
class ForwardResult:
    begin_logits: List[Tensor]
    end_logits: List[Tensor]
    bundles: List[AttentionBundle]
    passage_lengths: List[int] = field(default_factory=list)


@dataclass
class ReaderModel:
    config: ModelConfig
    vocab: Vocabulary
    params: Dict[str, Tensor]
    kind: str = "aba"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"model kind must be one of {KINDS}, got '{self.kind}'")

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def forward(self, batch: Batch, training: bool, rng: Optional[Rng] = None) -> ForwardResult:
        run = forward if self.kind == "aba" else forward_baseline
        return run(batch, self.config, self.params, training, rng)


# ========== PARAMETERS ==========

def init_params(config: ModelConfig, vocab_size: int, rng: Rng, kind: str = "aba") -> Dict[str, Tensor]:
    """Named parameters; the baseline has no gates and a d-wide attention/head."""
    if kind not in KINDS:
        raise ConfigurationError(f"model kind must be one of {KINDS}, got '{kind}'")
    params: Dict[str, Tensor] = {}
    params["embedding"] = init_embedding(vocab_size, config.d, rng.child(_EMBEDDING_STREAM)).weights

    encoder_rng = rng.child(_ENCODER_STREAM)
    for i in range(config.n):
        block = init_encoder_block(config.d, config.d_ff, encoder_rng)
        params.update(block.named_parameters(f"encoder.{i}"))

    D = config.layers * config.d if kind == "aba" else config.d
    params["trilinear_w"] = init_trilinear(D, rng.child(_TRILINEAR_STREAM)).w
    if kind == "aba":
        params["lambda_p"] = init_gate(config.layers, config.d, config.gate_init).values
        params["lambda_q"] = init_gate(config.layers, config.d, config.gate_init).values

    head = init_span_head(4 * D, rng.child(_HEAD_STREAM))
    params["span_begin"] = head.w_begin
    params["span_end"] = head.w_end
    return params


def build_model(config: ModelConfig, vocab: Vocabulary, kind: str = "aba") -> ReaderModel:
    params = init_params(config, len(vocab), Rng(config.seed), kind)
    model = ReaderModel(config=config, vocab=vocab, params=params, kind=kind)
    logger.info(f"🔧 Built {kind} model: {model.parameter_count()} parameters, L={config.layers}, d={config.d}")
    return model


# ========== BATCHING ==========

def passage_ids(example: MrcExample, vocab: Vocabulary, max_len: int) -> List[int]:
    """Ids truncated to max_len, always ending on the reserved no-answer token."""
    tokens = example.passage_tokens
    if len(tokens) > max_len:
        tokens = tokens[:max_len - 1] + tokens[-1:]
    return vocab.encode(tokens)


def make_batch(examples: Sequence[MrcExample], vocab: Vocabulary, config: ModelConfig) -> Batch:
    p_lists = [passage_ids(e, vocab, config.max_passage_len) for e in examples]
    q_lists = [vocab.encode(e.question_tokens[:config.max_question_len]) or [Vocabulary.UNK]
               for e in examples]
    l_max = max(len(p) for p in p_lists)
    m_max = max(len(q) for q in q_lists)

    def pad(lists, width):
        ids = np.full((len(lists), width), Vocabulary.PAD, dtype=np.int64)
        mask = np.zeros((len(lists), width), dtype=bool)
        for row, seq in enumerate(lists):
            ids[row, :len(seq)] = seq
            mask[row, :len(seq)] = True
        return ids, mask

    p_ids, p_mask = pad(p_lists, l_max)
    q_ids, q_mask = pad(q_lists, m_max)
    return Batch(
        examples=list(examples),
        passage_ids=p_ids, question_ids=q_ids,
        passage_mask=p_mask, question_mask=q_mask,
        passage_lengths=[len(p) for p in p_lists],
        question_lengths=[len(q) for q in q_lists],
    )


def gold_span(example: MrcExample, length: int) -> Optional[Tuple[int, int]]:
    """First gold span that survives truncation to `length` tokens."""
    if example.is_impossible:
        return length - 1, length - 1
    for begin, end in example.gold_spans:
        if end < length - 1:
            return begin, end
    return None


# ========== FORWARD ==========

def _encode(ids: np.ndarray, mask: np.ndarray, table: EmbeddingTable,
            blocks: List[EncoderBlock]) -> Tuple[Tensor, List[Tensor], Tensor]:
    E = embed(ids, table)
    x = add_positions(E)
    Cs = encode_stack(x, blocks, mask)
    return E, Cs, (Cs[-1] if Cs else x)


def _run(batch: Batch, config: ModelConfig, params: Dict[str, Tensor],
         training: bool, rng: Optional[Rng], use_hos: bool) -> ForwardResult:
    table = EmbeddingTable(params["embedding"])
    blocks = [EncoderBlock.from_named(params, f"encoder.{i}") for i in range(config.n)]
    trilinear = TrilinearWeights(params["trilinear_w"])
    head = SpanHead(params["span_begin"], params["span_end"])
    if use_hos:
        gate_p, gate_q = GateMatrix(params["lambda_p"]), GateMatrix(params["lambda_q"])

    result = ForwardResult([], [], [], list(batch.passage_lengths))
    for i, example in enumerate(batch.examples):
        p_mask, q_mask = batch.passage_mask[i], batch.question_mask[i]
        try:
            E_p, Cs_p, top_p = _encode(batch.passage_ids[i], p_mask, table, blocks)
            E_q, Cs_q, top_q = _encode(batch.question_ids[i], q_mask, table, blocks)
            base = cross_attend(top_p, top_q, p_mask, q_mask)

            if use_hos:
                p = apply_gate(build_hos(E_p, Cs_p, base.a_p), gate_p)
                q = apply_gate(build_hos(E_q, Cs_q, base.a_q), gate_q)
            else:
                p, q = base.a_p, base.a_q

            bundle = bidirectional_attention(p, q, trilinear, p_mask, q_mask,
                                             config.dropout, training, rng)
            begin, end = span_logits(bundle.fused, head, p_mask)
        except ReaderError as e:
            raise ForwardError(example.id, e) from e

        result.begin_logits.append(begin)
        result.end_logits.append(end)
        result.bundles.append(bundle)
    return result


def forward(batch: Batch, config: ModelConfig, params: Dict[str, Tensor],
            training: bool, rng: Optional[Rng] = None) -> ForwardResult:
    return _run(batch, config, params, training, rng, use_hos=True)


def forward_baseline(batch: Batch, config: ModelConfig, params: Dict[str, Tensor],
                     training: bool, rng: Optional[Rng] = None) -> ForwardResult:
    return _run(batch, config, params, training, rng, use_hos=False)


# ========== PREDICTION ==========

def predict_spans(model: ReaderModel, examples: Sequence[MrcExample],
                  batch_size: int = 16) -> List[SpanPrediction]:
    spans: List[SpanPrediction] = []
    for start in range(0, len(examples), batch_size):
        batch = make_batch(examples[start:start + batch_size], model.vocab, model.config)
        out = model.forward(batch, training=False)
        for begin, end, length in zip(out.begin_logits, out.end_logits, out.passage_lengths):
            spans.append(decode_span(begin.data[:length], end.data[:length], model.config.max_answer_len))
    return spans


def predict(model: ReaderModel, examples: Sequence[MrcExample], batch_size: int = 16) -> Dict[str, str]:
    """id -> answer text; unanswerable predictions become ""."""
    answers: Dict[str, str] = {}
    for example, span in zip(examples, predict_spans(model, examples, batch_size)):
        answers[example.id] = span_text(example, span)
    return answers
