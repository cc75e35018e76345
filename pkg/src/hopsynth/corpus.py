"""Corpus ingestion: parse a hyperlinked JSONL corpus into an immutable store.

Input format is UTF-8 JSONL, one document per line:
    {"id": str, "title": str, "text": str,
     "anchors": [{"span": str, "target": str}], "topic": str (optional)}

Document texts are truncated to the configured token budget; anchors are
resolved against titles to build an undirected link graph. The store is
never mutated after ingestion, so it is safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from .metrics import token_spans


class CorpusFormatError(ValueError):
    """Raised for unreadable, malformed, or duplicate corpus records."""


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    text: str
    anchors: tuple[tuple[str, str], ...]  # (surface_span, target_title)
    topic: Optional[str] = None


@dataclass
class CorpusConfig:
    max_doc_tokens: int = 100
    dangling_link_policy: str = "drop"  # or "keep_unresolved"

    def __post_init__(self):
        if self.max_doc_tokens < 1:
            raise ValueError("max_doc_tokens must be >= 1")
        if self.dangling_link_policy not in ("drop", "keep_unresolved"):
            raise ValueError(f"unknown dangling_link_policy: {self.dangling_link_policy}")


@dataclass
class CorpusStore:
    documents: dict[str, Document]
    title_index: dict[str, str]
    link_graph: dict[str, set[str]]  # outbound edges only
    topic_clusters: dict[str, set[str]]

    def __len__(self) -> int:
        return len(self.documents)


# A topic labeler maps (title, text) to a label. Built-ins below; anything
# callable with the same signature plugs in.
TopicLabeler = Callable[[str, str], str]


class KeywordTopicLabeler:
    """Bucket documents by the first matching keyword in title+text."""

    def __init__(self, buckets: Optional[dict[str, str]] = None, fallback: str = "misc"):
        self.buckets = buckets or {
            "film": "film", "movie": "film", "director": "film", "documentary": "film",
            "band": "music", "album": "music", "song": "music", "rock": "music",
            "season": "sport", "league": "sport", "team": "sport", "coach": "sport",
            "mathematician": "science", "scientist": "science", "physics": "science",
            "novel": "literature", "writer": "literature", "author": "literature",
        }
        self.fallback = fallback

    def __call__(self, title: str, text: str) -> str:
        haystack = f"{title} {text}".lower()
        for keyword, label in self.buckets.items():
            if keyword in haystack:
                return label
        return self.fallback


def truncate_text(text: str, max_tokens: int) -> str:
    """Prefix of `text` with at most max_tokens pipeline tokens.

    Cuts at the end of the last kept token, preserving the original
    characters between tokens.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    spans = token_spans(text)
    if len(spans) <= max_tokens:
        return text
    return text[: spans[max_tokens - 1][1]]


def _parse_record(raw: str, line_no: int) -> dict:
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise CorpusFormatError(f"line {line_no}: record is not an object")
    for key in ("id", "title", "text"):
        if not isinstance(record.get(key), str) or not record[key]:
            raise CorpusFormatError(f"line {line_no}: missing or empty field {key!r}")
    anchors = record.get("anchors", [])
    if not isinstance(anchors, list):
        raise CorpusFormatError(f"line {line_no}: anchors must be an array")
    for anchor in anchors:
        if (
            not isinstance(anchor, dict)
            or not isinstance(anchor.get("span"), str)
            or not isinstance(anchor.get("target"), str)
        ):
            raise CorpusFormatError(f"line {line_no}: anchor needs string span and target")
    topic = record.get("topic")
    if topic is not None and not isinstance(topic, str):
        raise CorpusFormatError(f"line {line_no}: topic must be a string")
    return record


def ingest_corpus(
    path: str | Path,
    config: Optional[CorpusConfig] = None,
    topic_labeler: Optional[TopicLabeler] = None,
) -> CorpusStore:
    """Parse a corpus file into a CorpusStore.

    Topic clusters are built when any record carries a topic or a labeler is
    given (records without a topic then fall back to the labeler, defaulting
    to KeywordTopicLabeler); with neither, clusters stay empty. Anchors whose
    span no longer occurs in the truncated text are discarded so every stored
    anchor is quotable from the stored document.
    """
    config = config or CorpusConfig()
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusFormatError(f"cannot read corpus file {path}: {exc}") from exc

    records: list[tuple[int, dict]] = []
    id_lines: dict[str, int] = {}
    title_lines: dict[str, int] = {}
    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        record = _parse_record(raw, line_no)
        doc_id, title = record["id"], record["title"]
        if doc_id in id_lines:
            raise CorpusFormatError(
                f"duplicate id {doc_id!r} on lines {id_lines[doc_id]} and {line_no}"
            )
        if title in title_lines:
            raise CorpusFormatError(
                f"duplicate title {title!r} on lines {title_lines[title]} and {line_no}"
            )
        id_lines[doc_id] = line_no
        title_lines[title] = line_no
        records.append((line_no, record))

    title_to_id = {rec["title"]: rec["id"] for _, rec in records}
    has_file_topics = any(rec.get("topic") for _, rec in records)
    label_docs = has_file_topics or topic_labeler is not None
    if label_docs and topic_labeler is None:
        topic_labeler = KeywordTopicLabeler()

    documents: dict[str, Document] = {}
    link_graph: dict[str, set[str]] = {}
    topic_clusters: dict[str, set[str]] = {}
    for _, record in records:
        doc_id = record["id"]
        text = truncate_text(record["text"], config.max_doc_tokens)
        anchors: list[tuple[str, str]] = []
        edges: set[str] = set()
        for anchor in record.get("anchors", []):
            span, target = anchor["span"], anchor["target"]
            if span not in text:
                continue  # outside the truncation window
            target_id = title_to_id.get(target)
            if target_id is None:
                if config.dangling_link_policy == "keep_unresolved":
                    anchors.append((span, target))
                continue
            anchors.append((span, target))
            if target_id != doc_id:
                edges.add(target_id)
        topic = record.get("topic")
        if label_docs and not topic:
            topic = topic_labeler(record["title"], text)
        documents[doc_id] = Document(
            id=doc_id, title=record["title"], text=text,
            anchors=tuple(anchors), topic=topic if label_docs else None,
        )
        link_graph[doc_id] = edges
        if label_docs:
            topic_clusters.setdefault(topic, set()).add(doc_id)

    return CorpusStore(
        documents=documents,
        title_index=title_to_id,
        link_graph=link_graph,
        topic_clusters=topic_clusters,
    )


def hyperlink_neighbors(store: CorpusStore, doc_id: str) -> list[str]:
    """Documents connected to doc_id by a hyperlink in either direction."""
    if doc_id not in store.documents:
        raise KeyError(f"unknown document id: {doc_id}")
    neighbors = set(store.link_graph.get(doc_id, ()))
    for other, targets in store.link_graph.items():
        if doc_id in targets and other != doc_id:
            neighbors.add(other)
    return sorted(neighbors)


def topic_neighbors(store: CorpusStore, doc_id: str) -> list[str]:
    """Other members of doc_id's topic cluster, sorted."""
    if doc_id not in store.documents:
        raise KeyError(f"unknown document id: {doc_id}")
    topic = store.documents[doc_id].topic
    if topic is None:
        return []
    return sorted(store.topic_clusters.get(topic, set()) - {doc_id})


def serialize_store(store: CorpusStore, path: str | Path) -> int:
    """Write the store back out in the corpus input format; returns doc count."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for doc_id in sorted(store.documents):
            doc = store.documents[doc_id]
            record = {
                "id": doc.id,
                "title": doc.title,
                "text": doc.text,
                "anchors": [{"span": s, "target": t} for s, t in doc.anchors],
            }
            if doc.topic is not None:
                record["topic"] = doc.topic
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(store.documents)
