"""
Predictor - Span head, joint begin/end decoding and the span loss

A span sitting on the passage's last token (the reserved no-answer slot)
means the question is unanswerable.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from core.biattention import FusedRepresentation
from core.tensor import (
    MASK_VALUE, Rng, Tensor, add, cross_entropy, masked_fill, matmul, parameter, reshape,
)
from utils.errors import DimensionError, EmptyInputError, LabelError, ParameterError

logger = logging.getLogger(__name__)

Logits = Union[Tensor, np.ndarray, Sequence[float]]


@dataclass
class SpanPrediction:
    begin: int
    end: int
    score: float  # log p(begin) + log p(end)
    is_unanswerable: bool


@dataclass
class SpanHead:
    w_begin: Tensor  # 4D x 1
    w_end: Tensor    # 4D x 1


def init_span_head(width: int, rng: Rng) -> SpanHead:
    bound = 1.0 / math.sqrt(width)
    return SpanHead(
        w_begin=parameter(rng.uniform(-bound, bound, (width, 1))),
        w_end=parameter(rng.uniform(-bound, bound, (width, 1))),
    )


def span_logits(I: FusedRepresentation, head: SpanHead,
                mask: Sequence[bool]) -> Tuple[Tensor, Tensor]:
    """
    Begin/end logits over passage positions; padded positions get MASK_VALUE.

    The reserved no-answer token is a real token, so it always stays
    unmasked.
    """
    features = I.I if isinstance(I, FusedRepresentation) else I
    l, width = features.shape
    if head.w_begin.shape != (width, 1) or head.w_end.shape != (width, 1):
        raise DimensionError(f"span head {head.w_begin.shape} does not fit fused width {width}")
    keep = np.asarray(mask, dtype=bool)
    if keep.shape != (l,):
        raise DimensionError(f"mask length {keep.shape} does not match passage length {l}")

    begin = reshape(matmul(features, head.w_begin), (l,))
    end = reshape(matmul(features, head.w_end), (l,))
    if not keep.all():
        begin = masked_fill(begin, keep, MASK_VALUE)
        end = masked_fill(end, keep, MASK_VALUE)
    return begin, end


def _as_array(x: Logits) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shift = z.max()
    return z - (shift + np.log(np.exp(z - shift).sum()))


def decode_span(begin_logits: Logits, end_logits: Logits, max_len: int) -> SpanPrediction:
    """
    Best (b, e) with b <= e <= b + max_len - 1 by begin[b] + end[e].

    np.argmax returns the first maximum in row-major order, so ties go to
    the smallest begin, then the smallest end.
    """
    begin = _as_array(begin_logits)
    end = _as_array(end_logits)
    if begin.shape != end.shape or begin.ndim != 1:
        raise DimensionError(f"decode_span: logits of shape {begin.shape} and {end.shape}")
    l = begin.shape[0]
    if l == 0:
        raise EmptyInputError("decode_span: empty logits")
    if max_len < 1:
        raise ParameterError(f"max_len must be positive, got {max_len}")

    b_idx = np.arange(l)[:, None]
    e_idx = np.arange(l)[None, :]
    allowed = (e_idx >= b_idx) & (e_idx <= b_idx + max_len - 1)
    scores = np.where(allowed, begin[:, None] + end[None, :], -np.inf)
    b, e = divmod(int(np.argmax(scores)), l)

    score = float(_log_softmax(begin)[b] + _log_softmax(end)[e])
    return SpanPrediction(begin=b, end=e, score=score, is_unanswerable=(b == e == l - 1))


def span_loss(begin_logits: Tensor, end_logits: Tensor, gold_begin: int, gold_end: int) -> Tensor:
    """Sum of begin and end cross-entropies."""
    l = begin_logits.shape[0]
    for name, idx in (("begin", gold_begin), ("end", gold_end)):
        if not 0 <= idx < l:
            raise LabelError(f"gold {name} {idx} outside passage of length {l}")
    return add(cross_entropy(begin_logits, gold_begin), cross_entropy(end_logits, gold_end))


def span_to_text(raw_context: str, char_offsets: Sequence[Tuple[int, int]],
                 prediction: SpanPrediction) -> str:
    """Answer string for a decoded span; "" for the no-answer convention."""
    if prediction.is_unanswerable:
        return ""
    start = char_offsets[prediction.begin][0]
    stop = char_offsets[prediction.end][1]
    return raw_context[start:stop]


def span_text(example, prediction: SpanPrediction) -> str:
    """span_to_text for anything carrying raw_context and token_char_offsets."""
    return span_to_text(example.raw_context, example.token_char_offsets, prediction)
