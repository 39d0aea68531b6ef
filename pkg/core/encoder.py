"""
Encoder - Embedding, transformer encoder stack and base cross-attention

Produces every per-layer representation the history-of-semantic stack
needs: E (embeddings), C^1..C^n (one tensor per encoder block, all kept)
and A (one symmetric passage/question cross-attention pass).
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np

from core.tensor import (
    MASK_VALUE, Rng, Tensor, add, constant, gather_rows, layer_norm, masked_fill,
    matmul, parameter, relu, scale, softmax_rows, transpose,
)
from utils.errors import ConfigurationError, DimensionError, VocabularyError

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
# Reserved final passage token; a span on it means "no answer"
NO_ANSWER_TOKEN = "<no-answer>"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, NO_ANSWER_TOKEN)


@dataclass
class Vocabulary:
    """Token <-> id map. PAD is id 0, UNK id 1, NO_ANSWER id 2."""
    tokens: List[str]
    index: Dict[str, int] = field(init=False, repr=False)

    PAD = 0
    UNK = 1
    NO_ANSWER = 2

    def __post_init__(self):
        if tuple(self.tokens[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise VocabularyError(f"vocabulary must start with {SPECIAL_TOKENS}")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise VocabularyError("vocabulary contains duplicate tokens")

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], min_freq: int = 1) -> "Vocabulary":
        counts = Counter(tok for tokens in token_lists for tok in tokens)
        for special in SPECIAL_TOKENS:
            counts.pop(special, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        kept = [tok for tok, n in ranked if n >= min_freq]
        logger.info(f"📚 Vocabulary: {len(kept)} tokens (+{len(SPECIAL_TOKENS)} special)")
        return cls(list(SPECIAL_TOKENS) + kept)

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.index.get(tok, self.UNK) for tok in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.tokens[i] for i in ids]

    def to_list(self) -> List[str]:
        return list(self.tokens)

    @classmethod
    def from_list(cls, tokens: List[str]) -> "Vocabulary":
        return cls(list(tokens))


@dataclass
class EmbeddingTable:
    weights: Tensor  # V x d

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]


@dataclass
class EncoderBlock:
    """Single-head self-attention + two-layer feed-forward, post-norm residuals."""
    wq: Tensor
    wk: Tensor
    wv: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln1_gamma: Tensor
    ln1_beta: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor

    PARAM_NAMES = ("wq", "wk", "wv", "w1", "b1", "w2", "b2",
                   "ln1_gamma", "ln1_beta", "ln2_gamma", "ln2_beta")

    @property
    def d(self) -> int:
        return self.wq.shape[0]

    def named_parameters(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.{name}": getattr(self, name) for name in self.PARAM_NAMES}

    @classmethod
    def from_named(cls, params: Dict[str, Tensor], prefix: str) -> "EncoderBlock":
        return cls(**{name: params[f"{prefix}.{name}"] for name in cls.PARAM_NAMES})


@dataclass
class BaseAttentionOutput:
    a_p: Tensor  # l x d, question-aware passage
    a_q: Tensor  # m x d, passage-aware question


# ========== INITIALIZATION ==========

def init_embedding(vocab_size: int, d: int, rng: Rng) -> EmbeddingTable:
    bound = 1.0 / math.sqrt(d)
    weights = rng.uniform(-bound, bound, (vocab_size, d))
    weights[Vocabulary.PAD] = 0.0
    return EmbeddingTable(parameter(weights))


def init_encoder_block(d: int, d_ff: int, rng: Rng) -> EncoderBlock:
    bound = 1.0 / math.sqrt(d)

    def uniform(*shape):
        return parameter(rng.uniform(-bound, bound, shape))

    return EncoderBlock(
        wq=uniform(d, d), wk=uniform(d, d), wv=uniform(d, d),
        w1=uniform(d, d_ff), b1=parameter(np.zeros(d_ff)),
        w2=uniform(d_ff, d), b2=parameter(np.zeros(d)),
        ln1_gamma=parameter(np.ones(d)), ln1_beta=parameter(np.zeros(d)),
        ln2_gamma=parameter(np.ones(d)), ln2_beta=parameter(np.zeros(d)),
    )


def sinusoidal_positions(length: int, d: int) -> np.ndarray:
    positions = np.arange(length)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(0, d, 2) / d))
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: d // 2])
    return table


# ========== OPERATIONS ==========

def embed(tokens: Sequence[int], table: EmbeddingTable) -> Tensor:
    """Row i is the table row of token i; PAD rows are zero."""
    ids = np.asarray(tokens, dtype=np.int64)
    bad = ids[(ids < 0) | (ids >= table.vocab_size)]
    if bad.size:
        raise VocabularyError(f"token id {int(bad[0])} outside vocabulary of size {table.vocab_size}")
    return gather_rows(table.weights, ids, padding_idx=Vocabulary.PAD)


def add_positions(x: Tensor) -> Tensor:
    return add(x, constant(sinusoidal_positions(x.shape[0], x.shape[1])))


def _attend(queries: Tensor, keys: Tensor, values: Tensor, key_mask: np.ndarray) -> Tensor:
    d = queries.shape[1]
    scores = scale(matmul(queries, transpose(keys)), 1.0 / math.sqrt(d))
    keep = np.broadcast_to(np.asarray(key_mask, dtype=bool)[None, :], scores.shape)
    return matmul(softmax_rows(masked_fill(scores, keep, MASK_VALUE)), values)


def apply_block(x: Tensor, block: EncoderBlock, mask: np.ndarray) -> Tensor:
    if x.shape[1] != block.d:
        raise DimensionError(f"encoder block width {block.d} does not match input {x.shape}")
    attended = _attend(matmul(x, block.wq), matmul(x, block.wk), matmul(x, block.wv), mask)
    h = layer_norm(add(x, attended), block.ln1_gamma, block.ln1_beta)
    hidden = relu(add(matmul(h, block.w1), block.b1))
    ff = add(matmul(hidden, block.w2), block.b2)
    return layer_norm(add(h, ff), block.ln2_gamma, block.ln2_beta)


def encode_stack(x: Tensor, blocks: List[EncoderBlock], mask: Sequence[bool]) -> List[Tensor]:
    """
    Run the blocks in order and return every block's output.

    Returns:
        [C^1, ..., C^n]; an empty list when there are no blocks
    """
    if blocks is None or not all(isinstance(b, EncoderBlock) for b in blocks):
        raise ConfigurationError("encode_stack needs a list of EncoderBlock")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (x.shape[0],):
        raise DimensionError(f"mask length {mask.shape} does not match sequence length {x.shape[0]}")
    outputs = []
    current = x
    for block in blocks:
        current = apply_block(current, block, mask)
        outputs.append(current)
    return outputs


def cross_attend(c_p: Tensor, c_q: Tensor,
                 p_mask: Sequence[bool], q_mask: Sequence[bool]) -> BaseAttentionOutput:
    """Scaled dot-product attention passage->question and question->passage."""
    if c_p.shape[1] != c_q.shape[1]:
        raise DimensionError(f"cross_attend: widths differ {c_p.shape} vs {c_q.shape}")
    p_mask = np.asarray(p_mask, dtype=bool)
    q_mask = np.asarray(q_mask, dtype=bool)
    if p_mask.shape != (c_p.shape[0],) or q_mask.shape != (c_q.shape[0],):
        raise DimensionError("cross_attend: mask lengths do not match sequence lengths")
    a_p = _attend(c_p, c_q, c_q, q_mask)
    a_q = _attend(c_q, c_p, c_p, p_mask)
    return BaseAttentionOutput(a_p=a_p, a_q=a_q)
