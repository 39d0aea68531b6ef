"""
Checkpoint - Single-file model snapshot

Layout:
    8 bytes   little-endian uint64, length of the JSON header
    header    compact JSON, sorted keys:
              {"config", "kind", "manifest": [{"name", "offset", "shape"}], "step", "vocab"}
    blocks    raw little-endian float64 parameter data, in manifest order

Offsets are relative to the first byte after the header. Header and
blocks are fully determined by the stored values, so load -> save gives
back the same bytes.
"""

import json
import logging
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from core.encoder import Vocabulary
from core.tensor import Rng, parameter
from pipeline.model import ReaderModel, init_params
from pipeline.settings import ModelConfig
from utils.errors import CheckpointError, ConfigurationError, VocabularyError
from utils.io import atomic_write

logger = logging.getLogger(__name__)

_HEADER_SIZE = 8
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    config: ModelConfig
    kind: str
    step: int
    vocab: List[str]
    params: Dict[str, np.ndarray]

    @classmethod
    def from_model(cls, model: ReaderModel, step: int) -> "Checkpoint":
        return cls(
            config=model.config,
            kind=model.kind,
            step=step,
            vocab=model.vocab.to_list(),
            params={name: t.numpy() for name, t in model.params.items()},
        )

    def to_model(self) -> ReaderModel:
        vocab = Vocabulary.from_list(self.vocab)
        return ReaderModel(
            config=self.config,
            vocab=vocab,
            params={name: parameter(values) for name, values in self.params.items()},
            kind=self.kind,
        )


def _header(ckpt: Checkpoint) -> bytes:
    manifest = []
    offset = 0
    for name, values in ckpt.params.items():
        manifest.append({"name": name, "offset": offset, "shape": list(values.shape)})
        offset += values.size * _DTYPE.itemsize
    header = {
        "config": ckpt.config.to_dict(),
        "kind": ckpt.kind,
        "manifest": manifest,
        "step": ckpt.step,
        "vocab": ckpt.vocab,
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    header = _header(ckpt)
    with atomic_write(path, "wb") as f:
        f.write(len(header).to_bytes(_HEADER_SIZE, "little"))
        f.write(header)
        for values in ckpt.params.values():
            f.write(np.ascontiguousarray(values, dtype=_DTYPE).tobytes())
    logger.info(f"💾 Saved {ckpt.kind} checkpoint (step {ckpt.step}) to {path}")


def _expected_shapes(config: ModelConfig, vocab_size: int, kind: str) -> Dict[str, tuple]:
    # Shapes only; the init values are thrown away
    return {name: t.shape for name, t in init_params(config, vocab_size, Rng(0), kind).items()}


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CheckpointError(path, f"cannot read ({e.strerror})") from e

    if len(raw) < _HEADER_SIZE:
        raise CheckpointError(path, "file too short for a header")
    header_len = int.from_bytes(raw[:_HEADER_SIZE], "little")
    body_start = _HEADER_SIZE + header_len
    if body_start > len(raw):
        raise CheckpointError(path, f"header length {header_len} exceeds file size {len(raw)}")

    try:
        header = json.loads(raw[_HEADER_SIZE:body_start].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        kind = header["kind"]
        step = int(header["step"])
        vocab = Vocabulary.from_list(header["vocab"]).to_list()
        manifest = header["manifest"]
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(path, f"unreadable header ({e})") from e
    except KeyError as e:
        raise CheckpointError(path, f"header is missing '{e.args[0]}'") from e
    except (ConfigurationError, VocabularyError, TypeError) as e:
        raise CheckpointError(path, f"bad header: {e}") from e

    try:
        expected = _expected_shapes(config, len(vocab), kind)
    except ConfigurationError as e:
        raise CheckpointError(path, str(e)) from e

    params: Dict[str, np.ndarray] = {}
    body = raw[body_start:]
    for entry in manifest:
        name, shape, offset = entry["name"], tuple(entry["shape"]), int(entry["offset"])
        if expected.get(name) != shape:
            raise CheckpointError(path, f"parameter '{name}' has shape {shape}, model expects {expected.get(name)}")
        count = int(np.prod(shape, dtype=np.int64))
        if offset < 0 or offset + count * _DTYPE.itemsize > len(body):
            raise CheckpointError(path, f"parameter '{name}' runs past the end of the file")
        params[name] = np.frombuffer(body, dtype=_DTYPE, count=count, offset=offset).astype(np.float64).reshape(shape)

    missing = sorted(set(expected) - set(params))
    if missing:
        raise CheckpointError(path, f"missing parameter(s): {', '.join(missing)}")

    logger.info(f"📂 Loaded {kind} checkpoint (step {step}) from {path}")
    return Checkpoint(config=config, kind=kind, step=step, vocab=vocab, params=params)
