"""
Settings - Model, training and run configuration

Precedence: config.py defaults (environment) < JSON config file < flags.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

import config
from core.hos import GATE_VARIANTS
from utils.errors import ConfigurationError
from utils.io import read_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    d: int = config.D_MODEL
    d_ff: int = config.D_FF
    n: int = config.ENCODER_LAYERS
    dropout: float = config.DROPOUT_RATE
    max_passage_len: int = config.MAX_PASSAGE_LEN
    max_question_len: int = config.MAX_QUESTION_LEN
    max_answer_len: int = config.MAX_ANSWER_LEN
    gate_init: str = config.GATE_INIT
    seed: int = config.SEED

    def __post_init__(self):
        for name in ("d", "d_ff", "max_passage_len", "max_question_len", "max_answer_len"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n < 0:
            raise ConfigurationError(f"n must be >= 0, got {self.n}")
        if self.max_passage_len < 2:
            raise ConfigurationError("max_passage_len must leave room for the no-answer slot")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.gate_init not in GATE_VARIANTS:
            raise ConfigurationError(f"gate_init must be one of {GATE_VARIANTS}, got '{self.gate_init}'")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")

    @property
    def layers(self) -> int:
        """L = n + 2 stacked layers [E; C^1..C^n; A]."""
        return self.n + 2

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        return cls(**_checked(cls, data, "model"))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = config.EPOCHS
    lr: float = config.LEARNING_RATE
    batch_size: int = config.BATCH_SIZE
    clip_norm: float = config.CLIP_NORM
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    dev_fraction: float = config.DEV_FRACTION

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")
        if self.lr < 0:
            raise ConfigurationError(f"lr must be >= 0, got {self.lr}")
        if self.clip_norm <= 0:
            raise ConfigurationError(f"clip_norm must be positive, got {self.clip_norm}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        return cls(**_checked(cls, data, "train"))


@dataclass
class RunConfig:
    """Everything one CLI invocation needs."""
    subcommand: str
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    input_paths: Dict[str, Optional[str]] = field(default_factory=dict)
    output_paths: Dict[str, Optional[str]] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.model.seed

    def validate_paths(self) -> None:
        """Fail fast on unreadable inputs or unwritable outputs."""
        for name, path in self.input_paths.items():
            if path is None:
                continue
            if not os.path.isfile(path):
                raise ConfigurationError(f"{name} file not found: {path}")
        for name, path in self.output_paths.items():
            if path is None:
                continue
            target = path if name.endswith("_dir") else os.path.dirname(os.path.abspath(path))
            if os.path.exists(target) and not os.access(target, os.W_OK):
                raise ConfigurationError(f"{name} is not writable: {target}")


def _checked(cls, data: Dict[str, Any], section: str) -> Dict[str, Any]:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown {section} setting(s): {', '.join(unknown)}")
    return dict(data)


# Flag name -> (section, field)
_OVERRIDES = {
    "seed": ("model", "seed"),
    "gate_init": ("model", "gate_init"),
    "epochs": ("train", "epochs"),
    "lr": ("train", "lr"),
    "batch_size": ("train", "batch_size"),
}


def load_run_config(path: Optional[str],
                    overrides: Optional[Dict[str, Any]] = None) -> Tuple[ModelConfig, TrainConfig]:
    """
    Read {"model": {...}, "train": {...}} and apply non-None flag overrides.
    """
    model_data: Dict[str, Any] = {}
    train_data: Dict[str, Any] = {}
    if path:
        raw = read_json(path)
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        extra = sorted(set(raw) - {"model", "train"})
        if extra:
            raise ConfigurationError(f"{path}: unknown section(s): {', '.join(extra)}")
        model_data = dict(raw.get("model", {}))
        train_data = dict(raw.get("train", {}))
        logger.info(f"📋 Loaded config from {path}")

    model = ModelConfig.from_dict(model_data)
    train = TrainConfig.from_dict(train_data)

    model_changes: Dict[str, Any] = {}
    train_changes: Dict[str, Any] = {}
    for flag, value in (overrides or {}).items():
        if value is None:
            continue
        if flag not in _OVERRIDES:
            raise ConfigurationError(f"unknown override '{flag}'")
        section, name = _OVERRIDES[flag]
        (model_changes if section == "model" else train_changes)[name] = value

    return replace(model, **model_changes), replace(train, **train_changes)
