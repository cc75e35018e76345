"""Pipeline configuration: a flat key=value file plus flag overrides.

Example config file:

    corpus.max_doc_tokens = 100
    pairing.pairs_per_document = 4
    filter.f1_threshold = 0.70
    verify.k = 7
    backend.kind = mock
    embeddings.kind = mock
    recognizer.kind = heuristic

Dotted keys map onto the stage config objects; unknown keys are rejected so
typos fail loudly. Command-line flags override file values.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import CorpusConfig, KeywordTopicLabeler
from .entities import HeuristicRecognizer, HttpRecognizer
from .evalharness import EvalConfig
from .genbackend import HttpBackend, MockBackend
from .mockllm import GoldScriptRule, SyntheticPipelineRule
from .pairing import PairingConfig
from .retrieval import FileEmbedder, HashEmbedder, HttpEmbedder
from .synthesis import FilterConfig
from .verification import VerifyConfig


class ConfigError(ValueError):
    pass


@dataclass
class BackendSpec:
    kind: str = "mock"  # mock | http
    endpoint: Optional[str] = None
    mock_table: Optional[str] = None  # JSON file: prompt hash -> completion
    mock_script: Optional[str] = None  # JSON file for GoldScriptRule
    mock_rule: str = "synthetic"  # synthetic | none
    max_inflight: int = 8


@dataclass
class EmbeddingsSpec:
    kind: str = "mock"  # mock | file | http
    endpoint: Optional[str] = None
    file: Optional[str] = None
    dim: int = 256


@dataclass
class RecognizerSpec:
    kind: str = "heuristic"  # heuristic | http
    endpoint: Optional[str] = None


@dataclass
class PipelineConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    pairing: PairingConfig = field(default_factory=PairingConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    backend: BackendSpec = field(default_factory=BackendSpec)
    embeddings: EmbeddingsSpec = field(default_factory=EmbeddingsSpec)
    recognizer: RecognizerSpec = field(default_factory=RecognizerSpec)
    task: str = "mqa"
    seed: int = 0
    workers: int = 0  # 0 = available cores
    dev_size: int = 5000
    topics_labeler: str = "file"  # file | keyword | none
    examples_path: Optional[str] = None
    eval_corpus: Optional[str] = None
    eval_mode: str = "greedy"  # greedy | self_consistency

    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


_SECTIONS = {
    "corpus": ("max_doc_tokens", "dangling_link_policy"),
    "pairing": ("pairs_per_document", "rng_seed"),
    "filter": ("f1_threshold", "min_entities_hyper", "min_entities_topic"),
    "verify": ("k",),
    "eval": ("max_hops", "k", "self_consistency_samples"),
    "backend": ("kind", "endpoint", "mock_table", "mock_script", "mock_rule", "max_inflight"),
    "embeddings": ("kind", "endpoint", "file", "dim"),
    "recognizer": ("kind", "endpoint"),
}
_TOP_LEVEL = {
    "task": "task",
    "seed": "seed",
    "workers": "workers",
    "dev_size": "dev_size",
    "topics.labeler": "topics_labeler",
    "examples": "examples_path",
    "eval.corpus": "eval_corpus",
    "eval.mode": "eval_mode",
}


def _coerce(current, raw: str):
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_config_file(path: str | Path, config: Optional[PipelineConfig] = None) -> PipelineConfig:
    config = config or PipelineConfig()
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        set_config_key(config, key, value, where=f"{path}:{line_no}")
    return config


def set_config_key(config: PipelineConfig, key: str, value: str, where: str = "override") -> None:
    if key in _TOP_LEVEL:
        attr = _TOP_LEVEL[key]
        setattr(config, attr, _coerce(getattr(config, attr), value))
        return
    if "." in key:
        section, name = key.split(".", 1)
        if section in _SECTIONS and name in _SECTIONS[section]:
            target = getattr(config, section)
            current = getattr(target, name)
            setattr(target, name, _coerce(current if current is not None else "", value))
            return
    raise ConfigError(f"{where}: unknown config key {key!r}")


def build_backend(config: PipelineConfig):
    spec = config.backend
    if spec.kind == "http":
        if not spec.endpoint:
            raise ConfigError("backend.kind=http requires backend.endpoint")
        return HttpBackend(spec.endpoint, max_inflight=spec.max_inflight)
    if spec.kind == "mock":
        table = None
        if spec.mock_table:
            table = json.loads(Path(spec.mock_table).read_text(encoding="utf-8"))
        rule = None
        if spec.mock_script:
            rule = GoldScriptRule.from_file(spec.mock_script)
        elif spec.mock_rule == "synthetic" and table is None:
            rule = SyntheticPipelineRule()
        if table is None and rule is None:
            table = {}
        return MockBackend(table=table, rule=rule)
    raise ConfigError(f"unknown backend.kind {spec.kind!r}")


def build_embedder(config: PipelineConfig):
    spec = config.embeddings
    if spec.kind == "mock":
        return HashEmbedder(dim=spec.dim)
    if spec.kind == "file":
        if not spec.file:
            raise ConfigError("embeddings.kind=file requires embeddings.file")
        return FileEmbedder(spec.file)
    if spec.kind == "http":
        if not spec.endpoint:
            raise ConfigError("embeddings.kind=http requires embeddings.endpoint")
        return HttpEmbedder(spec.endpoint)
    raise ConfigError(f"unknown embeddings.kind {spec.kind!r}")


def build_recognizer(config: PipelineConfig):
    spec = config.recognizer
    if spec.kind == "heuristic":
        return HeuristicRecognizer()
    if spec.kind == "http":
        if not spec.endpoint:
            raise ConfigError("recognizer.kind=http requires recognizer.endpoint")
        return HttpRecognizer(spec.endpoint)
    raise ConfigError(f"unknown recognizer.kind {spec.kind!r}")


def build_topic_labeler(config: PipelineConfig):
    if config.topics_labeler == "keyword":
        return KeywordTopicLabeler()
    if config.topics_labeler == "none":
        return None
    if config.topics_labeler == "file":
        return None  # ingest auto-configures from record topics
    raise ConfigError(f"unknown topics.labeler {config.topics_labeler!r}")
