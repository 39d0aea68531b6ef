"""
HOS - History-of-semantic stacks and the adaptive gate

A LayerStack keeps every representation of one sequence in the fixed
order [E; C^1; ...; C^n; A]. The gate is an L x d trainable matrix; each
layer is scaled feature-wise by its gate row (broadcast over positions)
and the gated layers are concatenated on the feature axis.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from core.tensor import Tensor, concat_features, elementwise_mul, parameter, slice_cols, slice_rows
from utils.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)

GATE_VARIANTS = ("first", "last")


@dataclass
class LayerStack:
    layers: List[Tensor]

    @property
    def L(self) -> int:
        return len(self.layers)

    @property
    def length(self) -> int:
        return self.layers[0].shape[0]

    @property
    def width(self) -> int:
        return self.layers[0].shape[1]


@dataclass
class GateMatrix:
    values: Tensor  # L x d

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class GatedRepresentation:
    features: Tensor  # len x (L*d)
    L: int

    @property
    def d(self) -> int:
        return self.features.shape[1] // self.L

    @property
    def shape(self):
        return self.features.shape

    def block(self, k: int) -> Tensor:
        return slice_cols(self.features, k * self.d, (k + 1) * self.d)


def build_hos(E: Tensor, Cs: List[Tensor], A: Tensor) -> LayerStack:
    layers = [E, *Cs, A]
    expected = E.shape
    for k, layer in enumerate(layers):
        if layer.ndim != 2 or layer.shape != expected:
            raise DimensionError(f"HOS layer {k} has shape {layer.shape}, expected {expected}")
    return LayerStack(layers)


def init_gate(L: int, d: int, variant: str = "first") -> GateMatrix:
    """
    Ones on one layer's gate row, zeros on every other row.

    "first" opens the embedding layer E (entry 0 of the stack); "last"
    opens the attention output A instead.
    """
    if L < 2 or d < 1:
        raise ParameterError(f"gate needs L >= 2 and d >= 1, got L={L}, d={d}")
    if variant not in GATE_VARIANTS:
        raise ParameterError(f"unknown gate init variant '{variant}', expected one of {GATE_VARIANTS}")
    values = np.zeros((L, d))
    values[0 if variant == "first" else L - 1] = 1.0
    return GateMatrix(parameter(values))


def apply_gate(stack: LayerStack, gate: GateMatrix) -> GatedRepresentation:
    if gate.L != stack.L or gate.d != stack.width:
        raise DimensionError(f"gate {gate.values.shape} does not fit a stack of {stack.L} x {stack.width}")
    gated = [elementwise_mul(layer, slice_rows(gate.values, k, k + 1))
             for k, layer in enumerate(stack.layers)]
    return GatedRepresentation(concat_features(gated), stack.L)
