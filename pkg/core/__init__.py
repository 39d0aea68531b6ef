# Core module - Hot Path components (tensor math and the reader layers)
from .tensor import Tensor, Rng, backward, zero_grad
from .encoder import (
    Vocabulary, EmbeddingTable, EncoderBlock, BaseAttentionOutput,
    embed, encode_stack, cross_attend,
)
from .hos import LayerStack, GateMatrix, GatedRepresentation, build_hos, init_gate, apply_gate
from .biattention import (
    AttentionBundle, TrilinearWeights, FusedRepresentation,
    similarity, p2q_attention, q2p_attention, fuse, bidirectional_attention,
)
from .predictor import SpanPrediction, SpanHead, span_logits, decode_span, span_loss, span_text

__all__ = [
    'Tensor', 'Rng', 'backward', 'zero_grad',
    'Vocabulary', 'EmbeddingTable', 'EncoderBlock', 'BaseAttentionOutput',
    'embed', 'encode_stack', 'cross_attend',
    'LayerStack', 'GateMatrix', 'GatedRepresentation', 'build_hos', 'init_gate', 'apply_gate',
    'AttentionBundle', 'TrilinearWeights', 'FusedRepresentation',
    'similarity', 'p2q_attention', 'q2p_attention', 'fuse', 'bidirectional_attention',
    'SpanPrediction', 'SpanHead', 'span_logits', 'decode_span', 'span_loss', 'span_text',
]
