"""Answer normalization, token-level F1, exact match, and the pipeline tokenizer.

Normalization and scoring follow the SQuAD v1 convention: lowercase, strip
punctuation, drop articles, collapse whitespace, then compare whitespace
tokens as multisets.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_ARTICLES = {"a", "an", "the"}
_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class ScorePair:
    """EM/F1 for one prediction. em=True implies f1 == 1.0."""

    em: bool
    f1: float


def tokenize(text: str) -> list[str]:
    """Split into word and punctuation tokens.

    Maximal alphanumeric runs are single tokens; every other non-space
    character is its own token, so "1,800" becomes ["1", ",", "800"].
    """
    return _TOKEN_RE.findall(text)


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character (start, end) spans of tokenize(text), in order."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation chars, drop articles, single-space join."""
    lowered = text.lower()
    no_punct = "".join(ch for ch in lowered if ch not in _PUNCT)
    kept = [tok for tok in no_punct.split() if tok not in _ARTICLES]
    return " ".join(kept)


def token_f1(pred: str, gold: str) -> float:
    """Multiset-overlap F1 over normalized whitespace tokens.

    Both sides empty after normalization scores 1.0; exactly one empty
    scores 0.0.
    """
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(pred: str, gold: str) -> bool:
    return normalize_answer(pred) == normalize_answer(gold)


def score_pair(pred: str, gold: str) -> ScorePair:
    em = exact_match(pred, gold)
    return ScorePair(em=em, f1=1.0 if em else token_f1(pred, gold))


def word_count(text: str) -> int:
    """Whitespace word count, used for dataset statistics."""
    return len(text.split())
