"""Text-completion backends: a remote HTTP endpoint and a deterministic mock.

Wire protocol: POST {endpoint}/v1/completions with
    {"prompt": s, "max_tokens": n, "temperature": x, "top_p": x,
     "top_k": n|null, "stop": [s], "seed": n|null}
returning {"text": s}. The mock backend answers from a prompt-hash table
and/or a rule program and is a pure function of (prompt text, seed).
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import requests

from .promptkit import PromptText

QUESTION_GEN = "question_gen"
ANSWERING = "answering"
QUERY_GEN = "query_gen"
EVAL_GREEDY = "eval_greedy"
EVAL_SELF_CONSISTENCY = "eval_self_consistency"


class BackendUnavailable(RuntimeError):
    """The endpoint kept failing after bounded retries."""


class MalformedResponse(RuntimeError):
    """The endpoint answered with something other than {"text": str}."""


class EmptyCompletion(RuntimeError):
    """The completion was empty after stop-sequence trimming."""


@dataclass(frozen=True)
class DecodeParams:
    max_tokens: int
    temperature: float = 1.0
    top_p: float = 1.0
    top_k: Optional[int] = None
    stop: tuple[str, ...] = ()
    seed: Optional[int] = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        # one sampling family at a time: nucleus, top-k, or greedy
        if self.top_k is not None and self.top_p < 1.0:
            raise ValueError("top_k and nucleus top_p are mutually exclusive")
        if self.temperature == 0.0 and (self.top_k is not None or self.top_p < 1.0):
            raise ValueError("greedy decoding takes no top_k/top_p narrowing")

    def replace_seed(self, seed: Optional[int]) -> "DecodeParams":
        return DecodeParams(
            max_tokens=self.max_tokens, temperature=self.temperature,
            top_p=self.top_p, top_k=self.top_k, stop=self.stop, seed=seed,
        )


def default_decode_params(stage: str) -> DecodeParams:
    """Decoding defaults per pipeline stage."""
    if stage == QUESTION_GEN:
        return DecodeParams(max_tokens=64, top_p=0.9)
    if stage == ANSWERING:
        return DecodeParams(max_tokens=16, top_p=0.9)
    if stage == QUERY_GEN:
        return DecodeParams(max_tokens=64, top_p=0.9)
    if stage == EVAL_GREEDY:
        return DecodeParams(max_tokens=64, temperature=0.0)
    if stage == EVAL_SELF_CONSISTENCY:
        return DecodeParams(max_tokens=64, temperature=0.7, top_k=40)
    raise ValueError(f"unknown stage: {stage}")


def trim_at_stop(text: str, stops: Sequence[str]) -> str:
    """Cut at the earliest occurrence of any stop sequence."""
    cut = len(text)
    for stop in stops:
        if stop:
            idx = text.find(stop)
            if idx != -1:
                cut = min(cut, idx)
    return text[:cut]


def prompt_key(prompt_text: str) -> str:
    """Stable key for mock tables: hex sha256 of the prompt text."""
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


# A rule program computes a completion from (prompt_text, seed).
RuleProgram = Callable[[str, Optional[int]], str]


class MockBackend:
    """Deterministic backend: table lookup first, then the rule program.

    With neither a table entry nor a rule, the completion is empty (callers
    see EmptyCompletion), which is the natural way to script "the model has
    nothing useful to say here".
    """

    def __init__(self, table: Optional[dict[str, str]] = None, rule: Optional[RuleProgram] = None):
        if table is None and rule is None:
            raise ValueError("mock backend needs a completion table or a rule program")
        self.table = dict(table or {})
        self.rule = rule

    def raw_complete(self, prompt_text: str, params: DecodeParams) -> str:
        hit = self.table.get(prompt_key(prompt_text))
        if hit is not None:
            return hit
        if self.rule is not None:
            return self.rule(prompt_text, params.seed)
        return ""


class HttpBackend:
    """Client for the completion wire protocol with bounded retries."""

    def __init__(
        self,
        endpoint: str,
        max_retries: int = 3,
        backoff_base: float = 0.2,
        max_inflight: int = 8,
        timeout: float = 120.0,
        session=None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.session = session or requests.Session()
        self._inflight = threading.Semaphore(max_inflight)

    def raw_complete(self, prompt_text: str, params: DecodeParams) -> str:
        body = {
            "prompt": prompt_text,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "top_k": params.top_k,
            "stop": list(params.stop),
            "seed": params.seed,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                with self._inflight:
                    response = self.session.post(
                        f"{self.endpoint}/v1/completions", json=body, timeout=self.timeout
                    )
                response.raise_for_status()
                payload = response.json()
                if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
                    raise MalformedResponse(f"bad completion payload: {payload!r}")
                return payload["text"]
            except MalformedResponse:
                raise
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff_base * (2 ** attempt))
        raise BackendUnavailable(f"completion endpoint failed: {last_error}") from last_error


Backend = MockBackend | HttpBackend


def complete(backend: Backend, prompt: PromptText | str, params: DecodeParams) -> str:
    """Run one completion and trim it at the first stop sequence.

    Stop sequences come from the prompt when it carries them, otherwise from
    params.stop. Raises EmptyCompletion when nothing is left after trimming.
    """
    if isinstance(prompt, PromptText):
        text, stops = prompt.text, prompt.stop_sequences or params.stop
    else:
        text, stops = prompt, params.stop
    if not text:
        raise ValueError("prompt must be non-empty")
    raw = backend.raw_complete(text, params)
    trimmed = trim_at_stop(raw, stops)
    if not trimmed.strip():
        raise EmptyCompletion("completion empty after stop trimming")
    return trimmed
