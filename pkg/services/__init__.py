# Services module - Cold Path components (data, scoring, run records)
from .data import (
    MrcExample, SynthTaskSpec, tokenize, load_squad, generate_synthetic,
    hard_task_spec, split_corpus, write_jsonl, read_jsonl, load_corpus,
)
from .metrics import EvalResult, normalize_text, exact_match, f1_score, evaluate
from .database import RunLedger

__all__ = [
    'MrcExample', 'SynthTaskSpec', 'tokenize', 'load_squad', 'generate_synthetic',
    'hard_task_spec', 'split_corpus', 'write_jsonl', 'read_jsonl', 'load_corpus',
    'EvalResult', 'normalize_text', 'exact_match', 'f1_score', 'evaluate',
    'RunLedger',
]
