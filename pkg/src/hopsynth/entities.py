"""Entity recognizer plug-ins.

The pipeline only needs "which entity-like strings appear in this text".
Two built-ins: a heuristic recognizer that needs no network, and a client
for the HTTP protocol (POST /v1/entities {"texts": [...]} ->
{"entities": [[...]]}) so an external tagger can be swapped in.
"""

from __future__ import annotations

import re
from typing import Protocol

import requests

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_WORD = re.compile(r"\S+")


class EntityRecognizer(Protocol):
    def __call__(self, texts: list[str]) -> list[list[str]]: ...


def _is_capitalized(word: str) -> bool:
    for ch in word:
        if ch.isalpha():
            return ch.isupper()
    return False


def _has_digit(word: str) -> bool:
    return any(ch.isdigit() for ch in word)


def _strip_edges(word: str) -> str:
    return word.strip("\"'.,;:!?()[]{}")


class HeuristicRecognizer:
    """Capitalized-token spans not at sentence start, plus digit spans.

    Spans are maximal runs of qualifying words. A run anchored at the first
    word of a sentence sheds that word (sentence case is not evidence of a
    name) and keeps the remainder, so "Does The Border Surrender or ..."
    still yields "The Border Surrender".
    """

    def __call__(self, texts: list[str]) -> list[list[str]]:
        return [self.entities(text) for text in texts]

    def entities(self, text: str) -> list[str]:
        found: list[str] = []
        seen: set[str] = set()
        for sentence in _SENTENCE_SPLIT.split(text):
            words = [(m.group(), m.start()) for m in _WORD.finditer(sentence)]
            for span in self._runs(words, _is_capitalized, skip_sentence_start=True):
                if span not in seen:
                    seen.add(span)
                    found.append(span)
            for span in self._runs(words, _has_digit, skip_sentence_start=False):
                if span not in seen:
                    seen.add(span)
                    found.append(span)
        return found

    @staticmethod
    def _runs(words, predicate, skip_sentence_start):
        runs = []
        current: list[str] = []
        start_index = None
        for index, (word, _) in enumerate(words):
            if predicate(_strip_edges(word)):
                if not current:
                    start_index = index
                current.append(_strip_edges(word))
            else:
                if current:
                    runs.append((start_index, current))
                    current = []
        if current:
            runs.append((start_index, current))
        spans = []
        for start, run in runs:
            if skip_sentence_start and start == 0:
                run = run[1:]
            span = " ".join(w for w in run if w)
            if span:
                spans.append(span)
        return spans


class HttpRecognizer:
    """Client for the /v1/entities wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 30.0, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def __call__(self, texts: list[str]) -> list[list[str]]:
        response = self.session.post(
            f"{self.endpoint}/v1/entities", json={"texts": texts}, timeout=self.timeout
        )
        response.raise_for_status()
        payload = response.json()
        entities = payload["entities"]
        if len(entities) != len(texts):
            raise ValueError(
                f"recognizer returned {len(entities)} lists for {len(texts)} texts"
            )
        return [[str(e) for e in group] for group in entities]
