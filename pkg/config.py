"""
Configuration for the Adaptive Bidirectional Attention reader.

Defaults for every run. Each value can be overridden from the environment
(or a .env file); per-run values can be overridden again by a JSON config
file and command-line flags (flags win).
"""

import os

# Try to load .env file
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, repr(default)))


# ======== MODEL ========
D_MODEL = _env_int("ABA_D_MODEL", 64)
D_FF = _env_int("ABA_D_FF", 128)
ENCODER_LAYERS = _env_int("ABA_ENCODER_LAYERS", 4)

# Dropout on the similarity matrix H
DROPOUT_RATE = _env_float("ABA_DROPOUT", 0.1)

# Passage length includes the reserved no-answer slot at the end
MAX_PASSAGE_LEN = _env_int("ABA_MAX_PASSAGE_LEN", 384)
MAX_QUESTION_LEN = _env_int("ABA_MAX_QUESTION_LEN", 64)
MAX_ANSWER_LEN = _env_int("ABA_MAX_ANSWER_LEN", 30)

# "first" = ones on the embedding layer, "last" = ones on the attention layer A
GATE_INIT = os.getenv("ABA_GATE_INIT", "first")

SEED = _env_int("ABA_SEED", 0)

# ======== TRAINING ========
EPOCHS = _env_int("ABA_EPOCHS", 15)
LEARNING_RATE = _env_float("ABA_LR", 1e-3)
BATCH_SIZE = _env_int("ABA_BATCH_SIZE", 16)
CLIP_NORM = _env_float("ABA_CLIP_NORM", 5.0)

# Adam moments
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Held-out share when no --dev file is given
DEV_FRACTION = _env_float("ABA_DEV_FRACTION", 0.1)

# ======== OUTPUT FILES ========
CHECKPOINT_FILE = "model.ckpt"
METRICS_FILE = "metrics.csv"
ABLATION_FILE = "ablation.csv"

# Run ledger (SQLite) written under the output directory; empty disables it
RUN_LEDGER = os.getenv("ABA_RUN_LEDGER", "runs.db")

# ======== LOGGING ========
LOG_LEVEL = os.getenv("ABA_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("ABA_LOG_FILE", "")
