"""
Tensor - Dense float64 arrays with reverse-mode autodiff

Each differentiable op builds an output Tensor that remembers its parents
and a closure that pushes the output gradient back to them. backward()
walks the graph in reverse topological order, then releases it.

Broadcasting is deliberately narrow: a second operand of shape [1×d] or
[d] may broadcast along the rows of an [l×d] first operand. Nothing else.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import DimensionError, LabelError, ParameterError

logger = logging.getLogger(__name__)

# Similarity/logit value for padded positions
MASK_VALUE = -1e30


class Tensor:
    """
    Node in the autodiff graph.

    data is always a C-contiguous float64 ndarray; grad (when present)
    has the same shape.
    """

    def __init__(self, data, requires_grad: bool = False,
                 _children: Tuple["Tensor", ...] = (), _op: str = ""):
        array = np.asarray(data, dtype=np.float64)
        # ascontiguousarray would promote 0-d scalars to shape (1,)
        self.data = array if array.flags.c_contiguous else np.ascontiguousarray(array)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._prev = _children
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op = _op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return elementwise_mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


@dataclass
class Rng:
    """
    Seeded generator: numpy PCG64 fed through SeedSequence(seed, spawn_key).

    PCG64's output stream is fixed by numpy for a given seed sequence, so
    draws are reproducible across runs and platforms.
    """
    seed: int
    spawn_key: Tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, tag: int) -> "Rng":
        """Independent stream derived from (seed, spawn_key + tag)."""
        return Rng(self.seed, self.spawn_key + (tag,))

    def random(self, shape) -> np.ndarray:
        return self.generator.random(shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)


# ========== CONSTRUCTION ==========

def parameter(data) -> Tensor:
    """Trainable leaf."""
    return Tensor(data, requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def ones(shape) -> Tensor:
    return Tensor(np.ones(shape))


def _result(data: np.ndarray, parents: Sequence[Tensor], op: str) -> Tensor:
    needs_grad = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs_grad,
                  _children=tuple(parents) if needs_grad else (), _op=op)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True).reshape(t.shape)
    else:
        t.grad = t.grad + g.reshape(t.shape)


def _require_2d(x: Tensor, op: str) -> None:
    if x.ndim != 2:
        raise DimensionError(f"{op}: expected a 2-D tensor, got shape {x.shape}")


def _row_broadcast(a: Tensor, b: Tensor, op: str) -> bool:
    """True when b broadcasts along a's rows, False for equal shapes."""
    if a.shape == b.shape:
        return False
    if a.ndim == 2 and b.shape in ((1, a.shape[1]), (a.shape[1],)):
        return True
    raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} are not compatible")


# ========== LINEAR ALGEBRA ==========

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    out = _result(a.data @ b.data, (a, b), "matmul")

    def _backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)
    out._backward = _backward
    return out


def transpose(x: Tensor) -> Tensor:
    _require_2d(x, "transpose")
    out = _result(x.data.T, (x,), "transpose")

    def _backward(g):
        _accumulate(x, g.T)
    out._backward = _backward
    return out


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    if math.prod(shape) != x.size:
        raise DimensionError(f"reshape: cannot view {x.shape} as {shape}")
    out = _result(x.data.reshape(shape), (x,), "reshape")

    def _backward(g):
        _accumulate(x, g.reshape(x.shape))
    out._backward = _backward
    return out


# ========== ELEMENTWISE ==========

def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _row_broadcast(a, b, "elementwise_mul")
    out = _result(a.data * b.data, (a, b), "mul")

    def _backward(g):
        _accumulate(a, g * b.data)
        gb = g * a.data
        _accumulate(b, gb.sum(axis=0) if broadcast else gb)
    out._backward = _backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _row_broadcast(a, b, "add")
    out = _result(a.data + b.data, (a, b), "add")

    def _backward(g):
        _accumulate(a, g)
        _accumulate(b, g.sum(axis=0) if broadcast else g)
    out._backward = _backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _row_broadcast(a, b, "sub")
    out = _result(a.data - b.data, (a, b), "sub")

    def _backward(g):
        _accumulate(a, g)
        _accumulate(b, -(g.sum(axis=0) if broadcast else g))
    out._backward = _backward
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    out = _result(x.data * factor, (x,), "scale")

    def _backward(g):
        _accumulate(x, g * factor)
    out._backward = _backward
    return out


def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    out = _result(np.where(active, x.data, 0.0), (x,), "relu")

    def _backward(g):
        _accumulate(x, g * active)
    out._backward = _backward
    return out


def masked_fill(x: Tensor, keep: np.ndarray, value: float = MASK_VALUE) -> Tensor:
    """Replace entries where keep is False by value; no gradient reaches them."""
    keep = np.broadcast_to(np.asarray(keep, dtype=bool), x.shape)
    out = _result(np.where(keep, x.data, value), (x,), "masked_fill")

    def _backward(g):
        _accumulate(x, np.where(keep, g, 0.0))
    out._backward = _backward
    return out


# ========== NORMALIZATION ==========

def _row_softmax(z: np.ndarray) -> np.ndarray:
    z = np.ascontiguousarray(z)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(x: Tensor) -> Tensor:
    _require_2d(x, "softmax_rows")
    y = _row_softmax(x.data)
    out = _result(y, (x,), "softmax_rows")

    def _backward(g):
        _accumulate(x, y * (g - (g * y).sum(axis=1, keepdims=True)))
    out._backward = _backward
    return out


def softmax_cols(x: Tensor) -> Tensor:
    # Same arithmetic as softmax_rows on the transpose, so the two agree exactly
    _require_2d(x, "softmax_cols")
    y = _row_softmax(x.data.T).T
    out = _result(y, (x,), "softmax_cols")

    def _backward(g):
        _accumulate(x, y * (g - (g * y).sum(axis=0, keepdims=True)))
    out._backward = _backward
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization followed by a learned affine map."""
    _require_2d(x, "layer_norm")
    d = x.shape[1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match width {d}")
    mu = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = _result(xhat * gamma.data + beta.data, (x, gamma, beta), "layer_norm")

    def _backward(g):
        _accumulate(beta, g.sum(axis=0))
        _accumulate(gamma, (g * xhat).sum(axis=0))
        gx = g * gamma.data
        _accumulate(x, inv_std * (gx - gx.mean(axis=1, keepdims=True)
                                  - xhat * (gx * xhat).mean(axis=1, keepdims=True)))
    out._backward = _backward
    return out


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[Rng]) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate); eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ParameterError("dropout in training mode needs an Rng")
    factor = 1.0 / (1.0 - rate)
    mask = (rng.random(x.shape) >= rate) * factor
    out = _result(x.data * mask, (x,), "dropout")

    def _backward(g):
        _accumulate(x, g * mask)
    out._backward = _backward
    return out


# ========== STRUCTURE ==========

def concat_features(parts: List[Tensor]) -> Tensor:
    if not parts:
        raise DimensionError("concat_features: nothing to concatenate")
    for p in parts:
        _require_2d(p, "concat_features")
    rows = parts[0].shape[0]
    if any(p.shape[0] != rows for p in parts):
        raise DimensionError(f"concat_features: row counts differ {[p.shape for p in parts]}")
    if len(parts) == 1:
        return parts[0]
    widths = [p.shape[1] for p in parts]
    out = _result(np.concatenate([p.data for p in parts], axis=1), tuple(parts), "concat")

    def _backward(g):
        start = 0
        for p, w in zip(parts, widths):
            _accumulate(p, g[:, start:start + w])
            start += w
    out._backward = _backward
    return out


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    _require_2d(x, "slice_cols")
    if not 0 <= start < stop <= x.shape[1]:
        raise DimensionError(f"slice_cols: [{start}, {stop}) outside width {x.shape[1]}")
    out = _result(x.data[:, start:stop], (x,), "slice_cols")

    def _backward(g):
        full = np.zeros(x.shape)
        full[:, start:stop] = g
        _accumulate(x, full)
    out._backward = _backward
    return out


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    _require_2d(x, "slice_rows")
    if not 0 <= start < stop <= x.shape[0]:
        raise DimensionError(f"slice_rows: [{start}, {stop}) outside height {x.shape[0]}")
    out = _result(x.data[start:stop], (x,), "slice_rows")

    def _backward(g):
        full = np.zeros(x.shape)
        full[start:stop] = g
        _accumulate(x, full)
    out._backward = _backward
    return out


def gather_rows(table: Tensor, ids: Sequence[int], padding_idx: Optional[int] = 0) -> Tensor:
    """Row lookup; the padding id yields a zero row and sends no gradient."""
    _require_2d(table, "gather_rows")
    idx = np.asarray(ids, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise DimensionError(f"gather_rows: ids must be in [0, {table.shape[0]})")
    keep = idx != padding_idx if padding_idx is not None else np.ones(idx.shape, dtype=bool)
    data = table.data[idx] * keep[:, None]
    out = _result(data.reshape(idx.size, table.shape[1]), (table,), "gather")

    def _backward(g):
        full = np.zeros(table.shape)
        np.add.at(full, idx[keep], g[keep])
        _accumulate(table, full)
    out._backward = _backward
    return out


def sum_all(x: Tensor) -> Tensor:
    out = _result(np.array(x.data.sum()), (x,), "sum")

    def _backward(g):
        _accumulate(x, np.full(x.shape, g.item()))
    out._backward = _backward
    return out


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """-log softmax(logits)[target] for a 1-D logit vector."""
    if logits.ndim != 1:
        raise DimensionError(f"cross_entropy: expected 1-D logits, got {logits.shape}")
    n = logits.shape[0]
    if not 0 <= target < n:
        raise LabelError(f"target index {target} outside [0, {n})")
    z = logits.data
    shift = z.max()
    log_norm = shift + np.log(np.exp(z - shift).sum())
    out = _result(np.array(log_norm - z[target]), (logits,), "cross_entropy")

    def _backward(g):
        probs = np.exp(z - log_norm)
        probs[target] -= 1.0
        _accumulate(logits, g.item() * probs)
    out._backward = _backward
    return out


# ========== AUTODIFF ==========

def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._prev:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Populate .grad on every requires_grad tensor reachable from loss.

    The graph is released afterwards; run a fresh forward pass before
    calling backward again.
    """
    if loss.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        logger.debug("backward called on a loss with no trainable inputs")
        return
    order = _topological_order(loss)
    loss.grad = np.ones(loss.shape)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in order:
        node._prev = ()
        node._backward = None


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
