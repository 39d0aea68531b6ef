"""
Bidirectional attention over gated multi-granularity features

H[i][j] = w . [p_i; q_j; p_i * q_j]      (trilinear similarity, then dropout)
H_row   = row softmax of H               (passage -> question weights)
H_col   = column softmax of H
M       = H_row . q                      (passage-to-question attention)
S       = H_row . H_col^T . p            (question-to-passage, second hop)
I       = [p; M; p * M; p * S]
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from core.hos import GatedRepresentation
from core.tensor import (
    MASK_VALUE, Rng, Tensor, add, concat_features, dropout, elementwise_mul, masked_fill,
    matmul, ones, parameter, reshape, slice_cols, softmax_cols, softmax_rows, transpose,
)
from utils.errors import DimensionError

logger = logging.getLogger(__name__)

Features = Union[GatedRepresentation, Tensor]


@dataclass
class TrilinearWeights:
    w: Tensor  # 3D weights over [p; q; p*q]

    @property
    def D(self) -> int:
        return self.w.shape[0] // 3


@dataclass
class FusedRepresentation:
    I: Tensor  # l x 4D

    @property
    def D(self) -> int:
        return self.I.shape[1] // 4


@dataclass
class AttentionBundle:
    H: Tensor
    H_row: Tensor
    H_col: Tensor
    M: Tensor
    S: Tensor
    fused: Optional[FusedRepresentation] = None


def init_trilinear(D: int, rng: Rng) -> TrilinearWeights:
    bound = 1.0 / math.sqrt(D)
    return TrilinearWeights(parameter(rng.uniform(-bound, bound, 3 * D)))


def _features(x: Features) -> Tensor:
    return x.features if isinstance(x, GatedRepresentation) else x


def _full_mask(mask: Optional[Sequence[bool]], n: int) -> np.ndarray:
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise DimensionError(f"mask of length {mask.shape} for a sequence of length {n}")
    return mask


def similarity(p: Features, q: Features, w: TrilinearWeights,
               rate: float = 0.0, training: bool = False, rng: Optional[Rng] = None,
               p_mask: Optional[Sequence[bool]] = None,
               q_mask: Optional[Sequence[bool]] = None) -> Tensor:
    """
    Trilinear similarity H (l x m) with dropout, padded pairs set to MASK_VALUE.
    """
    p, q = _features(p), _features(q)
    if p.ndim != 2 or q.ndim != 2:
        raise DimensionError(f"similarity: expected 2-D features, got {p.shape} and {q.shape}")
    l, D = p.shape
    m = q.shape[0]
    if q.shape[1] != D or w.w.shape != (3 * D,):
        raise DimensionError(f"similarity: widths p={p.shape}, q={q.shape}, w={w.w.shape} do not agree")

    w_row = reshape(w.w, (1, 3 * D))
    w_p = transpose(slice_cols(w_row, 0, D))
    w_q = transpose(slice_cols(w_row, D, 2 * D))
    w_pq = slice_cols(w_row, 2 * D, 3 * D)

    # Rank-one terms expanded by multiplying with constant ones
    passage_term = matmul(matmul(p, w_p), ones((1, m)))
    question_term = matmul(ones((l, 1)), transpose(matmul(q, w_q)))
    product_term = matmul(elementwise_mul(p, w_pq), transpose(q))
    H = add(add(passage_term, question_term), product_term)

    H = dropout(H, rate, training, rng)
    keep = _full_mask(p_mask, l)[:, None] & _full_mask(q_mask, m)[None, :]
    if not keep.all():
        H = masked_fill(H, keep, MASK_VALUE)
    return H


def p2q_attention(H_row: Tensor, q: Features) -> Tensor:
    q = _features(q)
    if H_row.ndim != 2 or H_row.shape[1] != q.shape[0]:
        raise DimensionError(f"p2q_attention: H_row {H_row.shape} vs question {q.shape}")
    return matmul(H_row, q)


def q2p_attention(H_row: Tensor, H_col: Tensor, p: Features) -> Tensor:
    p = _features(p)
    if H_row.shape != H_col.shape or H_col.shape[0] != p.shape[0]:
        raise DimensionError(
            f"q2p_attention: H_row {H_row.shape}, H_col {H_col.shape}, passage {p.shape}")
    return matmul(matmul(H_row, transpose(H_col)), p)


def fuse(p: Features, M: Tensor, S: Tensor) -> FusedRepresentation:
    p = _features(p)
    if not (p.shape == M.shape == S.shape):
        raise DimensionError(f"fuse: p {p.shape}, M {M.shape}, S {S.shape} must match")
    return FusedRepresentation(concat_features([p, M, elementwise_mul(p, M), elementwise_mul(p, S)]))


def bidirectional_attention(p: Features, q: Features, w: TrilinearWeights,
                            p_mask: Optional[Sequence[bool]] = None,
                            q_mask: Optional[Sequence[bool]] = None,
                            rate: float = 0.0, training: bool = False,
                            rng: Optional[Rng] = None) -> AttentionBundle:
    H = similarity(p, q, w, rate, training, rng, p_mask, q_mask)
    H_row = softmax_rows(H)
    H_col = softmax_cols(H)
    M = p2q_attention(H_row, q)
    S = q2p_attention(H_row, H_col, p)
    return AttentionBundle(H=H, H_row=H_row, H_col=H_col, M=M, S=S, fused=fuse(p, M, S))
