"""
Data - SQuAD 2.0 ingestion, tokenization and synthetic span tasks

Every passage gets one reserved token appended at the end
(NO_ANSWER_TOKEN); an unanswerable example's gold span sits on it.
"""

import json
import logging
import re
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import config
from core.encoder import NO_ANSWER_TOKEN
from core.tensor import Rng
from services.metrics import normalize_text
from utils.errors import ParameterError, ParseError, SchemaError
from utils.io import atomic_write, read_json

logger = logging.getLogger(__name__)

_TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]", re.UNICODE)

Span = Tuple[int, int]


@dataclass
class MrcExample:
    id: str
    passage_tokens: List[str]
    question_tokens: List[str]
    gold_spans: List[Span]
    is_impossible: bool
    raw_context: str
    token_char_offsets: List[Span]
    answer_texts: List[str] = field(default_factory=list)

    @property
    def passage_len(self) -> int:
        return len(self.passage_tokens)

    @property
    def trainable(self) -> bool:
        return bool(self.gold_spans)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, record: Dict) -> "MrcExample":
        return cls(
            id=record["id"],
            passage_tokens=list(record["passage_tokens"]),
            question_tokens=list(record["question_tokens"]),
            gold_spans=[tuple(s) for s in record["gold_spans"]],
            is_impossible=bool(record["is_impossible"]),
            raw_context=record["raw_context"],
            token_char_offsets=[tuple(o) for o in record["token_char_offsets"]],
            answer_texts=list(record.get("answer_texts", [])),
        )


@dataclass
class SynthTaskSpec:
    """
    Synthetic span task: the question names a cue; the answer is the run of
    tokens right after that cue in the passage, closed by the terminator.
    """
    vocab_size: int = 50
    passage_len_range: Tuple[int, int] = (20, 40)
    cue_token: str = "cue"
    answer_len_range: Tuple[int, int] = (1, 3)
    unanswerable_fraction: float = 0.0
    seed: int = 0
    num_cues: int = 1
    distractors: int = 0
    terminator_token: str = "stop"

    def __post_init__(self):
        if not 0.0 <= self.unanswerable_fraction <= 1.0:
            raise ParameterError(f"unanswerable_fraction must be in [0, 1], got {self.unanswerable_fraction}")
        if self.distractors and self.num_cues < 2:
            raise ParameterError("distractor cues need num_cues >= 2")
        lo, hi = self.answer_len_range
        if not 1 <= lo <= hi:
            raise ParameterError(f"bad answer_len_range {self.answer_len_range}")
        # cue + answer + terminator for the real cue and each decoy must fit
        needed = (1 + self.distractors) * (hi + 2)
        if self.passage_len_range[0] < needed or self.passage_len_range[0] > self.passage_len_range[1]:
            raise ParameterError(f"passage_len_range {self.passage_len_range} cannot hold {needed} reserved tokens")

    @property
    def cues(self) -> List[str]:
        if self.num_cues == 1:
            return [self.cue_token]
        return [f"{self.cue_token}{k}" for k in range(self.num_cues)]


def hard_task_spec(seed: int = 0) -> SynthTaskSpec:
    """Distractor cues plus 30% unanswerable questions."""
    return SynthTaskSpec(num_cues=4, distractors=2, unanswerable_fraction=0.3, seed=seed)


# ========== TOKENIZATION ==========

def tokenize(text: str) -> Tuple[List[str], List[Span]]:
    """Lowercased word and punctuation tokens with (start, end) char offsets."""
    tokens, offsets = [], []
    for match in _TOKEN_PATTERN.finditer(text):
        tokens.append(match.group().lower())
        offsets.append(match.span())
    return tokens, offsets


def _with_no_answer_slot(tokens: List[str], offsets: List[Span], context: str,
                         max_len: int) -> Tuple[List[str], List[Span]]:
    tokens = tokens[:max_len - 1] + [NO_ANSWER_TOKEN]
    offsets = offsets[:max_len - 1] + [(len(context), len(context))]
    return tokens, offsets


def _token_containing(offsets: Sequence[Span], char: int) -> Optional[int]:
    for i, (start, end) in enumerate(offsets):
        if start <= char < end:
            return i
    return None


def align_answer(context: str, offsets: Sequence[Span], text: str, answer_start: int) -> Optional[Span]:
    """Token span for a character answer, or None when it cannot be aligned exactly."""
    if not text:
        return None
    # The last offset is the reserved slot and never holds answer text
    real = offsets[:-1]
    begin = _token_containing(real, answer_start)
    end = _token_containing(real, answer_start + len(text) - 1)
    if begin is None or end is None or end < begin:
        return None
    covered = context[real[begin][0]:real[end][1]]
    if normalize_text(covered) != normalize_text(text):
        return None
    return begin, end


# ========== SQUAD ==========

def _field(record: Dict, name: str, where: str):
    if name not in record:
        raise SchemaError(name, where)
    return record[name]


def load_squad(path: str, max_passage_len: int = config.MAX_PASSAGE_LEN,
               max_question_len: int = config.MAX_QUESTION_LEN) -> List[MrcExample]:
    """
    One MrcExample per QA pair of a SQuAD 2.0 file.

    Answers that cannot be aligned to whole tokens are dropped with a
    warning; an answerable question left with no span is kept (so it can
    be predicted and scored) but is not trainable.
    """
    dataset = read_json(path)
    examples: List[MrcExample] = []
    dropped = 0
    for article in _field(dataset, "data", path):
        for paragraph in _field(article, "paragraphs", path):
            context = _field(paragraph, "context", path)
            tokens, offsets = tokenize(context)
            tokens, offsets = _with_no_answer_slot(tokens, offsets, context, max_passage_len)
            no_answer = (len(tokens) - 1, len(tokens) - 1)

            for qa in _field(paragraph, "qas", path):
                qid = _field(qa, "id", path)
                question_tokens = tokenize(_field(qa, "question", f"{path} qa {qid}"))[0]
                answers = _field(qa, "answers", f"{path} qa {qid}")
                is_impossible = bool(qa.get("is_impossible", not answers))

                if is_impossible:
                    spans, texts = [no_answer], [""]
                else:
                    spans, texts = [], []
                    for answer in answers:
                        text = _field(answer, "text", f"{path} qa {qid}")
                        start = _field(answer, "answer_start", f"{path} qa {qid}")
                        texts.append(text)
                        span = align_answer(context, offsets, text, int(start))
                        if span is None:
                            dropped += 1
                            logger.warning(f"Dropping unalignable answer '{text}' for {qid}")
                        elif span not in spans:
                            spans.append(span)

                examples.append(MrcExample(
                    id=qid,
                    passage_tokens=list(tokens),
                    question_tokens=question_tokens[:max_question_len],
                    gold_spans=spans,
                    is_impossible=is_impossible,
                    raw_context=context,
                    token_char_offsets=list(offsets),
                    answer_texts=texts,
                ))

    logger.info(f"📂 Loaded {len(examples)} examples from {path} ({dropped} answers dropped)")
    return examples


# ========== SYNTHETIC TASKS ==========

def _place_spans(rng: Rng, n: int, widths: List[int]) -> Optional[List[int]]:
    """Random non-overlapping start positions for blocks of the given widths."""
    slack = n - sum(widths)
    if slack < 0:
        return None
    # Distribute the slack as gaps around the blocks, then shuffle block order
    cuts = sorted(int(c) for c in rng.integers(0, slack + 1, size=len(widths)))
    order = [int(i) for i in rng.permutation(len(widths))]
    starts = [0] * len(widths)
    cursor = 0
    previous_cut = 0
    for cut, block in zip(cuts, order):
        cursor += cut - previous_cut
        previous_cut = cut
        starts[block] = cursor
        cursor += widths[block]
    return starts


def _synthetic_example(spec: SynthTaskSpec, rng: Rng, index: int) -> MrcExample:
    n = int(rng.integers(spec.passage_len_range[0], spec.passage_len_range[1] + 1))
    words = [f"w{int(i)}" for i in rng.integers(0, spec.vocab_size, size=n)]

    cues = spec.cues
    asked = cues[int(rng.integers(0, len(cues)))]
    answerable = bool(rng.random(None) >= spec.unanswerable_fraction)
    decoy_pool = [c for c in cues if c != asked]
    decoys = [decoy_pool[int(i)] for i in rng.integers(0, len(decoy_pool), size=spec.distractors)] \
        if spec.distractors else []

    cue_list = ([asked] if answerable else []) + decoys
    lengths = [int(rng.integers(spec.answer_len_range[0], spec.answer_len_range[1] + 1)) for _ in cue_list]
    starts = _place_spans(rng, n, [k + 2 for k in lengths])

    gold: Optional[Span] = None
    for block, (cue, k, start) in enumerate(zip(cue_list, lengths, starts)):
        words[start] = cue
        words[start + k + 1] = spec.terminator_token
        if answerable and block == 0:
            gold = (start + 1, start + k)

    context = " ".join(words)
    tokens, offsets = tokenize(context)
    tokens, offsets = _with_no_answer_slot(tokens, offsets, context, len(tokens) + 1)
    if gold is None:
        spans, texts = [(len(tokens) - 1, len(tokens) - 1)], [""]
    else:
        spans, texts = [gold], [context[offsets[gold[0]][0]:offsets[gold[1]][1]]]

    return MrcExample(
        id=f"synth-{spec.seed}-{index:06d}",
        passage_tokens=tokens,
        question_tokens=["what", "follows", asked, "?"],
        gold_spans=spans,
        is_impossible=gold is None,
        raw_context=context,
        token_char_offsets=offsets,
        answer_texts=texts,
    )


def generate_synthetic(spec: SynthTaskSpec, count: int) -> List[MrcExample]:
    if count < 1:
        raise ParameterError(f"count must be at least 1, got {count}")
    rng = Rng(spec.seed)
    examples = [_synthetic_example(spec, rng, i) for i in range(count)]
    impossible = sum(e.is_impossible for e in examples)
    logger.info(f"🧪 Generated {count} synthetic examples ({impossible} unanswerable)")
    return examples


def split_corpus(examples: List[MrcExample], dev_fraction: float,
                 rng: Rng) -> Tuple[List[MrcExample], List[MrcExample]]:
    """Deterministic shuffled split into (train, dev)."""
    if not 0.0 <= dev_fraction < 1.0:
        raise ParameterError(f"dev_fraction must be in [0, 1), got {dev_fraction}")
    order = rng.permutation(len(examples))
    n_dev = int(round(len(examples) * dev_fraction))
    dev = [examples[int(i)] for i in order[:n_dev]]
    train = [examples[int(i)] for i in order[n_dev:]]
    return train, dev


def references_of(examples: Sequence[MrcExample]) -> Dict[str, List[str]]:
    """id -> gold texts, in the shape services.metrics.evaluate expects."""
    return {e.id: (e.answer_texts or [""]) for e in examples}


# ========== JSON LINES ==========

def write_jsonl(examples: Sequence[MrcExample], path: str) -> None:
    with atomic_write(path) as f:
        for example in examples:
            f.write(json.dumps(example.to_dict(), ensure_ascii=False))
            f.write("\n")
    logger.info(f"💾 Wrote {len(examples)} examples to {path}")


def read_jsonl(path: str) -> List[MrcExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(path, f"line {lineno}: {e.msg}") from e
            try:
                examples.append(MrcExample.from_dict(record))
            except KeyError as e:
                raise SchemaError(str(e.args[0]), f"{path} line {lineno}") from e
    return examples


def load_corpus(path: str, max_passage_len: int = config.MAX_PASSAGE_LEN,
                max_question_len: int = config.MAX_QUESTION_LEN) -> List[MrcExample]:
    """SQuAD JSON or a JSON-lines corpus, chosen by file extension."""
    if path.endswith(".jsonl"):
        return read_jsonl(path)
    return load_squad(path, max_passage_len, max_question_len)
