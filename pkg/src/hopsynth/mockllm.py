"""Deterministic rule-program backends for offline runs and tests.

SyntheticPipelineRule understands the synthesis prompt layouts and plays a
cooperative-but-imperfect model: questions embed their target answer so the
answering rule can recover it, queries quote each document's leading tokens
so hash embeddings retrieve them, and seeded coin flips inject the failure
modes (empty output, entity-free questions, wrong answers) that exercise
the filter paths. GoldScriptRule replays scripted queries/answers for
evaluation episodes. Both are pure functions of (prompt text, seed).
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from pathlib import Path
from typing import Optional

_ANSWER_TAG = re.compile(r" regarding (.+)\?$")
_LABEL_TAG = re.compile(r"\[(SUPPORTS|REFUTES|NOT ENOUGH INFO)\]")


def _rng(prompt: str, seed: Optional[int]) -> random.Random:
    material = f"{seed}:{prompt}".encode("utf-8")
    return random.Random(int.from_bytes(hashlib.sha256(material).digest()[:8], "big"))


def _target_block(prompt: str) -> dict:
    block = prompt.split("\n\n")[-1]
    fields: dict = {"documents": [], "cue": ""}
    for line in block.split("\n"):
        if line.startswith("Document: "):
            fields["documents"].append(line[len("Document: "):])
        elif line.startswith("Question: "):
            fields["question"] = line[len("Question: "):]
        elif line.startswith("Claim: "):
            fields["claim"] = line[len("Claim: "):]
        elif line.startswith("Answer: "):
            fields["answer"] = line[len("Answer: "):]
    fields["cue"] = block.rsplit("\n", 1)[-1]
    return fields


def _lead_words(text: str, count: int = 4) -> str:
    return " ".join(text.split()[:count])


def _named_span(text: str) -> str:
    # first run of capitalized words after the sentence-initial one
    words = text.split()
    run: list[str] = []
    for word in words[1:]:
        clean = word.strip(".,;:()\"'")
        if clean and clean[0].isupper():
            run.append(clean)
            if len(run) == 2:
                break
        elif run:
            break
    if run:
        return " ".join(run)
    return _lead_words(text, 2)


class SyntheticPipelineRule:
    """Drives the whole synthesis pipeline without a real model."""

    def __init__(
        self,
        p_empty: float = 0.04,
        p_plain_question: float = 0.08,
        p_wrong_answer: float = 0.08,
        p_single_hop: float = 0.35,
        p_bad_queries: float = 0.05,
    ):
        self.p_empty = p_empty
        self.p_plain_question = p_plain_question
        self.p_wrong_answer = p_wrong_answer
        self.p_single_hop = p_single_hop
        self.p_bad_queries = p_bad_queries

    def __call__(self, prompt: str, seed: Optional[int]) -> str:
        rng = _rng(prompt, seed)
        target = _target_block(prompt)
        cue = target["cue"]
        if cue == "Question:":
            return self._question(target, rng)
        if cue == "Claim:":
            return self._claim(target, rng)
        if cue == "Answer:" and "claim" in target:
            return self._verify(target, rng)
        if cue == "Answer:":
            return self._answer(target, rng)
        if cue == "Query:":
            return self._queries(target, rng)
        return ""

    def _question(self, target, rng) -> str:
        if rng.random() < self.p_empty:
            return ""
        if rng.random() < self.p_plain_question:
            return " what is the relationship between them?"
        docs = target["documents"]
        first = _named_span(docs[0])
        second = _named_span(docs[-1])
        return f" What connects {first} with {second} regarding {target['answer']}?"

    def _answer(self, target, rng) -> str:
        match = _ANSWER_TAG.search(target.get("question", ""))
        if match is None:
            return " no idea"
        answer = match.group(1)
        if len(target["documents"]) >= 2:
            if rng.random() < self.p_wrong_answer:
                return " something else entirely"
            return f" {answer}"
        if rng.random() < self.p_single_hop:
            return f" {answer}"
        return " no idea"

    def _claim(self, target, rng) -> str:
        if rng.random() < self.p_empty:
            return ""
        docs = target["documents"]
        first = _named_span(docs[0])
        second = _named_span(docs[-1])
        return f" The record shows {first} relates to {second} [{target['answer']}]."

    def _verify(self, target, rng) -> str:
        match = _LABEL_TAG.search(target.get("claim", ""))
        if match is None:
            return " NOT ENOUGH INFO"
        label = match.group(1)
        if len(target["documents"]) >= 2:
            if rng.random() < self.p_wrong_answer:
                wrong = [l for l in ("SUPPORTS", "REFUTES", "NOT ENOUGH INFO") if l != label]
                return " " + rng.choice(wrong)
            return " " + label
        if rng.random() < self.p_single_hop:
            return " " + label
        return " " + rng.choice(["SUPPORTS", "REFUTES", "NOT ENOUGH INFO"])

    def _queries(self, target, rng) -> str:
        if rng.random() < self.p_bad_queries:
            return " Query: zzz unfindable gibberish"
        docs = target["documents"]
        lines = [f"Query: {_lead_words(doc)}" for doc in docs[:2]]
        return " " + "\n".join(lines)


class GoldScriptRule:
    """Replay scripted evaluation episodes.

    The script maps a question to {"queries": [s, ...], "answer": s}; the
    rule emits the next unseen query, then the answer. Loadable from a JSON
    file for CLI runs.
    """

    def __init__(self, script: dict[str, dict]):
        self.script = script

    @classmethod
    def from_file(cls, path: str | Path) -> "GoldScriptRule":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def __call__(self, prompt: str, seed: Optional[int]) -> str:
        question = None
        for line in prompt.split("\n"):
            if line.startswith("Question: "):
                question = line[len("Question: "):]
                break
        entry = self.script.get(question or "")
        if entry is None:
            return ""
        emitted = prompt.count("\nQuery: ")
        queries = entry.get("queries", [])
        if emitted < len(queries):
            return f"Query: {queries[emitted]}\n"
        return f"Answer: {entry['answer']}\n"
