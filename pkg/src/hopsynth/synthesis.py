"""Generation and filtering: questions/claims, entity filter, answerability,
hop classification, and query candidates.

A draft survives when (1) its question carries enough named entities, (2) the
backend can re-answer it from both documents above the F1 threshold, and
(3) valid retrieval queries exist downstream. Questions whose two-document
prediction agrees with a one-document prediction are kept as single-hop with
the predicted answer promoted to ground truth.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from . import promptkit
from .corpus import Document
from .genbackend import (
    ANSWERING,
    QUERY_GEN,
    QUESTION_GEN,
    Backend,
    DecodeParams,
    EmptyCompletion,
    complete,
    default_decode_params,
)
from .metrics import token_f1
from .pairing import HYPER, TOPIC, DocumentPair
from .promptkit import FewShotExample

logger = logging.getLogger(__name__)

TASK_MQA = "mqa"
TASK_FEVER = "fever"

ORIGIN_MODEL = "model"
ORIGIN_BACKUP = "original_question_backup"

FEVER_LABELS = ("SUPPORTS", "REFUTES", "NOT ENOUGH INFO")

MAX_MODEL_QUERIES = 4

_PROMPT_TASK = {
    (TASK_MQA, "question"): promptkit.MQA_QUESTION_GEN,
    (TASK_MQA, "answer"): promptkit.MQA_ANSWER,
    (TASK_MQA, "query"): promptkit.MQA_QUERY_GEN,
    (TASK_FEVER, "question"): promptkit.FEVER_CLAIM_GEN,
    (TASK_FEVER, "answer"): promptkit.FEVER_VERIFY,
    (TASK_FEVER, "query"): promptkit.FEVER_QUERY_GEN,
}


@dataclass(frozen=True)
class QuestionDraft:
    pair: DocumentPair
    task: str  # mqa | fever
    text: str
    prepared_answer: str


@dataclass(frozen=True)
class HopDecision:
    verdict: str  # keep | drop
    hops: str  # one | two
    answerable_in: frozenset[str]
    final_answer: str


@dataclass(frozen=True)
class QueryCandidate:
    text: str
    origin: str  # model | original_question_backup
    generation_rank: int


@dataclass
class FilterConfig:
    f1_threshold: float = 0.70  # strict greater-than
    min_entities_hyper: int = 1
    min_entities_topic: int = 2


def normalize_label(text: str) -> str:
    return " ".join(text.strip().upper().split())


def _setting(pair: DocumentPair, task: str) -> str:
    if task == TASK_FEVER:
        if pair.relation != HYPER:
            raise ValueError("fact-verification drafts only use hyper pairs")
        return HYPER
    return pair.relation


def _examples(task: str, role: str, setting: str, examples):
    if examples is not None:
        return examples
    return promptkit.builtin_examples(_PROMPT_TASK[(task, role)], setting)


def generate_question(
    pair: DocumentPair,
    answer: str,
    backend: Backend,
    task: str = TASK_MQA,
    examples: Optional[Sequence[FewShotExample]] = None,
    params: Optional[DecodeParams] = None,
    seed: Optional[int] = None,
) -> Optional[QuestionDraft]:
    """Generate one question (or claim) for a pair, or None when the backend
    produced nothing usable."""
    setting = _setting(pair, task)
    prompt = promptkit.render_prompt(
        _PROMPT_TASK[(task, "question")], setting,
        _examples(task, "question", setting, examples),
        [pair.d1.text, pair.d2.text], answer=answer,
    )
    params = params or default_decode_params(QUESTION_GEN)
    if seed is not None:
        params = params.replace_seed(seed)
    try:
        text = complete(backend, prompt, params).strip()
    except EmptyCompletion:
        return None
    if task == TASK_MQA:
        # questions must end at their question mark; repair or give up
        mark = text.find("?")
        text = text[: mark + 1] if mark != -1 else text + "?"
    return QuestionDraft(pair=pair, task=task, text=text, prepared_answer=answer)


def entity_count_filter(draft: QuestionDraft, recognizer, config: FilterConfig) -> bool:
    """True when the question names enough entities for its setting."""
    try:
        entities = recognizer([draft.text])[0]
    except Exception as exc:
        logger.warning("entity recognizer failed (%s); treating as zero entities", exc)
        entities = []
    minimum = (
        config.min_entities_hyper if draft.pair.relation == HYPER else config.min_entities_topic
    )
    return len(entities) >= minimum


def answer_question(
    question: str,
    docs: Sequence[Document],
    backend: Backend,
    task: str = TASK_MQA,
    setting: str = HYPER,
    examples: Optional[Sequence[FewShotExample]] = None,
    params: Optional[DecodeParams] = None,
    seed: Optional[int] = None,
) -> str:
    """Predict an answer for the question over exactly the given documents."""
    if not 1 <= len(docs) <= 2:
        raise ValueError("answering takes one or two documents")
    setting = HYPER if task == TASK_FEVER else setting
    prompt = promptkit.render_prompt(
        _PROMPT_TASK[(task, "answer")], setting,
        _examples(task, "answer", setting, examples),
        [doc.text for doc in docs], question=question,
    )
    params = params or default_decode_params(ANSWERING)
    if seed is not None:
        params = params.replace_seed(seed)
    try:
        return complete(backend, prompt, params).strip()
    except EmptyCompletion:
        return ""


def decide_answerable(pred: str, prepared: str, config: FilterConfig, task: str = TASK_MQA) -> bool:
    """MQA: token F1 strictly above the threshold. Fever: exact label match."""
    if task == TASK_FEVER:
        return bool(pred.strip()) and normalize_label(pred) == normalize_label(prepared)
    return token_f1(pred, prepared) > config.f1_threshold


def _agrees(a: str, b: str, config: FilterConfig, task: str) -> bool:
    if task == TASK_FEVER:
        return bool(a.strip()) and normalize_label(a) == normalize_label(b)
    return token_f1(a, b) > config.f1_threshold


def classify_hops(
    draft: QuestionDraft,
    pred_both: str,
    pred_first: str,
    pred_second: str,
    config: FilterConfig,
) -> HopDecision:
    """Keep/drop the draft and fix its hop count and final answer.

    When the two-document prediction agrees with a single-document one, the
    draft is kept as single-hop (topic pairs stay two-hop) and the prediction
    becomes the answer, even when it differs from the prepared answer.
    Otherwise the draft survives only if the two-document prediction matches
    the prepared answer, as two-hop. Everything else drops.
    """
    if not pred_both.strip():
        return HopDecision("drop", "two", frozenset(), "")
    agrees_first = _agrees(pred_both, pred_first, config, draft.task)
    agrees_second = _agrees(pred_both, pred_second, config, draft.task)
    if agrees_first or agrees_second:
        answerable_in = {"both"}
        if agrees_first:
            answerable_in.add("first")
        if agrees_second:
            answerable_in.add("second")
        hops = "two" if draft.pair.relation == TOPIC else "one"
        return HopDecision("keep", hops, frozenset(answerable_in), pred_both)
    if decide_answerable(pred_both, draft.prepared_answer, config, draft.task):
        return HopDecision("keep", "two", frozenset({"both"}), draft.prepared_answer)
    return HopDecision("drop", "two", frozenset(), "")


def generate_queries(
    pair: DocumentPair,
    question: str,
    answer: str,
    backend: Backend,
    task: str = TASK_MQA,
    examples: Optional[Sequence[FewShotExample]] = None,
    params: Optional[DecodeParams] = None,
    seed: Optional[int] = None,
) -> list[QueryCandidate]:
    """Model query candidates (capped) plus the original question as backup."""
    if not question:
        raise ValueError("query generation needs a question")
    setting = _setting(pair, task)
    prompt = promptkit.render_prompt(
        _PROMPT_TASK[(task, "query")], setting,
        _examples(task, "query", setting, examples),
        [pair.d1.text, pair.d2.text], question=question, answer=answer,
    )
    params = params or default_decode_params(QUERY_GEN)
    if seed is not None:
        params = params.replace_seed(seed)
    try:
        completion = complete(backend, prompt, params)
    except EmptyCompletion:
        completion = ""
    candidates: list[QueryCandidate] = []
    for line in completion.split("\n"):
        stripped = line.strip()
        if not stripped.startswith("Query:"):
            continue
        text = stripped[len("Query:"):].strip()
        if text:
            candidates.append(QueryCandidate(text, ORIGIN_MODEL, len(candidates)))
        if len(candidates) >= MAX_MODEL_QUERIES:
            break
    candidates.append(QueryCandidate(question, ORIGIN_BACKUP, len(candidates)))
    return candidates
