"""
Metrics - SQuAD-style exact match and token F1

Text is normalized the SQuAD way (lowercase, strip punctuation, drop
a/an/the, collapse whitespace). With several gold answers the best score
counts. An empty gold string marks an unanswerable question.
"""

import collections
import logging
import re
import string
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import pandas as pd

from utils.errors import InputError, SchemaError
from utils.io import atomic_write, read_json

logger = logging.getLogger(__name__)

_ARTICLES = re.compile(r"\b(a|an|the)\b", re.UNICODE)
_PUNCTUATION = set(string.punctuation)

Pairs = Union[Mapping[str, object], Iterable[Tuple[str, object]]]


@dataclass
class EvalResult:
    em: float
    f1: float
    per_question: List[Tuple[str, float, float]] = field(default_factory=list)

    def summary(self) -> Dict[str, float]:
        return {"exact_match": self.em, "f1": self.f1}


def normalize_text(s: str) -> str:
    """Lower text and remove punctuation, articles and extra whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCTUATION)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def _tokens(s: str) -> List[str]:
    return normalize_text(s).split() if s else []


def _f1_single(pred: str, gold: str) -> float:
    pred_toks = _tokens(pred)
    gold_toks = _tokens(gold)
    if not pred_toks or not gold_toks:
        # No-answer on either side: 1 if both agree, 0 otherwise
        return float(pred_toks == gold_toks)
    common = collections.Counter(pred_toks) & collections.Counter(gold_toks)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_toks)
    recall = num_same / len(gold_toks)
    return 2 * precision * recall / (precision + recall)


def exact_match(pred: str, golds: Sequence[str]) -> int:
    target = normalize_text(pred)
    return int(any(normalize_text(g) == target for g in golds))


def f1_score(pred: str, golds: Sequence[str]) -> float:
    return max(_f1_single(pred, g) for g in golds)


def _unique_map(items: Pairs, what: str) -> Dict[str, object]:
    if isinstance(items, Mapping):
        return dict(items)
    result: Dict[str, object] = {}
    for key, value in items:
        if key in result:
            raise InputError(f"duplicate question id '{key}' in {what}")
        result[key] = value
    return result


def evaluate(predictions: Pairs, references: Pairs) -> EvalResult:
    """
    Score every reference question; a missing prediction scores 0/0.

    Args:
        predictions: id -> answer text (a mapping, or (id, text) pairs)
        references: id -> list of gold texts
    """
    preds = _unique_map(predictions, "predictions")
    refs = _unique_map(references, "references")

    per_question = []
    for qid, golds in refs.items():
        if qid not in preds:
            logger.warning(f"Unanswered question {qid} will receive score 0")
            per_question.append((qid, 0.0, 0.0))
            continue
        pred = str(preds[qid])
        per_question.append((qid, float(exact_match(pred, golds)), f1_score(pred, golds)))

    n = len(per_question)
    em = sum(row[1] for row in per_question) / n if n else 0.0
    f1 = sum(row[2] for row in per_question) / n if n else 0.0
    logger.info(f"📊 Evaluated {n} questions: EM {em:.4f}, F1 {f1:.4f}")
    return EvalResult(em=em, f1=f1, per_question=per_question)


# ========== FILE FORMATS ==========

class _ObjectPairs(list):
    """Key/value pairs of one JSON object, in file order."""


def load_predictions(path: str) -> List[Tuple[str, str]]:
    """{"<question_id>": "<answer text>"} as ordered pairs (duplicates kept for evaluate to reject)."""
    pairs = read_json(path, object_pairs_hook=_ObjectPairs)
    if not isinstance(pairs, _ObjectPairs):
        raise InputError(f"{path}: predictions must be a JSON object")
    for key, value in pairs:
        if not isinstance(value, str):
            raise InputError(f"{path}: answer for '{key}' must be a string, got {type(value).__name__}")
    return list(pairs)


def load_references(path: str) -> Dict[str, List[str]]:
    """id -> gold answer texts from a SQuAD 2.0 file; unanswerable -> [""]."""
    dataset = read_json(path)
    if "data" not in dataset:
        raise SchemaError("data", path)
    refs: Dict[str, List[str]] = {}
    for article in dataset["data"]:
        for paragraph in article.get("paragraphs", []):
            for qa in paragraph.get("qas", []):
                if "id" not in qa:
                    raise SchemaError("id", path)
                qid = qa["id"]
                if qid in refs:
                    raise InputError(f"duplicate question id '{qid}' in {path}")
                texts = [a["text"] for a in qa.get("answers", []) if "text" in a]
                refs[qid] = texts if texts and not qa.get("is_impossible", False) else [""]
    return refs


def write_per_question_csv(result: EvalResult, path: str) -> None:
    frame = pd.DataFrame(result.per_question, columns=["id", "em", "f1"])
    with atomic_write(path) as f:
        frame.to_csv(f, index=False, lineterminator="\n")
