"""Corpus loading and chunking.

Source documents live one-per-file in a corpus directory, extension
``.tibb.txt``, encoded UTF-8:

    doc_id: tibb-honey
    title: On honey
    origin: Tibb-e-Nabawi
    default_citation: Sahih al-Bukhari 5684
    severity: informational

    Body text ... [[cite: Sahih al-Bukhari 5716]] more body text ...

A header block of ``key: value`` lines runs up to the first blank line; the
rest of the file is the body. Recognized header keys: ``doc_id`` (required),
``title``, ``origin``, ``default_citation``, ``context``, ``severity``.
Unknown keys are rejected. Inline markers of the form ``[[cite: ...]]``,
``[[context: ...]]`` and ``[[severity: ...]]`` override the corresponding
metadata for all following text; markers are metadata, not body content, and
are stripped from passage text.

Tokens are whitespace-delimited throughout (``str.split``); no model
vocabulary is involved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import (
    DuplicateDocId,
    EmptyCorpus,
    InvalidChunkParams,
    MalformedDocument,
    MissingPath,
)

CORPUS_SUFFIX = ".tibb.txt"

DEFAULT_MAX_TOKENS = 180
DEFAULT_OVERLAP_TOKENS = 30

_HEADER_KEYS = {"doc_id", "title", "origin", "default_citation", "context", "severity"}
_MARKER_RE = re.compile(r"\[\[(cite|context|severity):\s*([^\]]*?)\s*\]\]")


class Severity(str, Enum):
    INFORMATIONAL = "informational"
    CAUTION = "caution"
    CONTRAINDICATION = "contraindication"


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization; the single token definition used everywhere."""
    return text.split()


def count_tokens(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    title: str
    origin: str
    body: str
    default_citation: str = ""
    default_context: str = ""
    default_severity: Severity = Severity.INFORMATIONAL

    def __post_init__(self) -> None:
        if not self.doc_id.strip():
            raise MalformedDocument("doc_id must be non-empty")
        if not self.body.strip():
            raise MalformedDocument(f"document {self.doc_id!r} has an empty body")


@dataclass(frozen=True)
class Passage:
    passage_id: str
    doc_id: str
    text: str
    citation: str
    context: str
    severity: Severity
    token_count: int

    def __post_init__(self) -> None:
        if not self.citation:
            raise ValueError(f"passage {self.passage_id} has an empty citation")
        actual = count_tokens(self.text)
        if actual != self.token_count or actual == 0:
            raise ValueError(
                f"passage {self.passage_id}: token_count {self.token_count} "
                f"does not match tokenizer count {actual}"
            )

    def to_dict(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "doc_id": self.doc_id,
            "text": self.text,
            "citation": self.citation,
            "context": self.context,
            "severity": self.severity.value,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Passage":
        return cls(
            passage_id=d["passage_id"],
            doc_id=d["doc_id"],
            text=d["text"],
            citation=d["citation"],
            context=d["context"],
            severity=Severity(d["severity"]),
            token_count=d["token_count"],
        )


@dataclass(frozen=True)
class _TokenState:
    citation: str
    context: str
    severity: Severity


def _parse_document(path: Path) -> SourceDocument:
    raw = path.read_text(encoding="utf-8")
    lines = raw.splitlines()
    header: dict[str, str] = {}
    body_start = None
    for i, line in enumerate(lines):
        if not line.strip():
            body_start = i + 1
            break
        if ":" not in line:
            raise MalformedDocument(f"{path.name}: header line without ':': {line!r}")
        key, _, value = line.partition(":")
        key = key.strip()
        if key not in _HEADER_KEYS:
            raise MalformedDocument(f"{path.name}: unknown header key {key!r}")
        if key in header:
            raise MalformedDocument(f"{path.name}: repeated header key {key!r}")
        header[key] = value.strip()
    if body_start is None:
        raise MalformedDocument(f"{path.name}: no blank line terminating the header")
    if "doc_id" not in header or not header["doc_id"]:
        raise MalformedDocument(f"{path.name}: missing doc_id header")

    body = "\n".join(lines[body_start:])
    if not body.strip():
        raise MalformedDocument(f"{path.name}: empty body")

    severity_raw = header.get("severity", Severity.INFORMATIONAL.value)
    try:
        severity = Severity(severity_raw)
    except ValueError:
        raise MalformedDocument(f"{path.name}: invalid severity {severity_raw!r}") from None

    doc_id = header["doc_id"]
    return SourceDocument(
        doc_id=doc_id,
        title=header.get("title", doc_id),
        origin=header.get("origin", ""),
        body=body,
        default_citation=header.get("default_citation", ""),
        default_context=header.get("context", ""),
        default_severity=severity,
    )


def load_documents(path: str | Path) -> list[SourceDocument]:
    """Load every ``*.tibb.txt`` file under ``path``, lexicographic by filename."""
    root = Path(path)
    if not root.exists():
        raise MissingPath(f"corpus path does not exist: {root}")
    if not root.is_dir():
        raise MissingPath(f"corpus path is not a directory: {root}")
    files = sorted(p for p in root.iterdir() if p.name.endswith(CORPUS_SUFFIX))
    if not files:
        raise EmptyCorpus(f"no {CORPUS_SUFFIX} files in {root}")
    docs: list[SourceDocument] = []
    seen: set[str] = set()
    for f in files:
        doc = _parse_document(f)
        if doc.doc_id in seen:
            raise DuplicateDocId(f"doc_id {doc.doc_id!r} declared more than once")
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def _content_tokens(doc: SourceDocument) -> tuple[list[str], list[_TokenState]]:
    """Strip inline markers from the body, returning the content token stream
    together with the metadata state in effect at each token."""
    citation = doc.default_citation or doc.doc_id
    context = doc.default_context or doc.title
    severity = doc.default_severity

    tokens: list[str] = []
    states: list[_TokenState] = []
    pos = 0
    for m in _MARKER_RE.finditer(doc.body):
        chunk = doc.body[pos : m.start()]
        for tok in chunk.split():
            tokens.append(tok)
            states.append(_TokenState(citation, context, severity))
        key, value = m.group(1), m.group(2)
        if key == "cite":
            if not value:
                raise MalformedDocument(f"{doc.doc_id}: empty [[cite: ]] marker")
            citation = value
        elif key == "context":
            context = value
        else:
            try:
                severity = Severity(value)
            except ValueError:
                raise MalformedDocument(
                    f"{doc.doc_id}: invalid severity marker {value!r}"
                ) from None
        pos = m.end()
    for tok in doc.body[pos:].split():
        tokens.append(tok)
        states.append(_TokenState(citation, context, severity))
    return tokens, states


def chunk_document(
    doc: SourceDocument,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
) -> list[Passage]:
    """Split a document into passages of at most ``max_tokens`` tokens.

    Consecutive passages share ``overlap_tokens`` tokens; dropping the first
    ``overlap_tokens`` tokens of every passage after the first reproduces the
    document's content token stream exactly. Passage metadata (citation,
    context, severity) is whatever is in effect at the passage's first token.
    """
    if max_tokens < 1:
        raise InvalidChunkParams(f"max_tokens must be positive, got {max_tokens}")
    if overlap_tokens < 0 or overlap_tokens >= max_tokens:
        raise InvalidChunkParams(
            f"overlap_tokens must satisfy 0 <= overlap < max_tokens, "
            f"got overlap={overlap_tokens}, max={max_tokens}"
        )

    tokens, states = _content_tokens(doc)
    if not tokens:
        return []

    passages: list[Passage] = []
    start = 0
    ordinal = 0
    while True:
        end = min(start + max_tokens, len(tokens))
        window = tokens[start:end]
        state = states[start]
        passages.append(
            Passage(
                passage_id=f"{doc.doc_id}#{ordinal:04d}",
                doc_id=doc.doc_id,
                text=" ".join(window),
                citation=state.citation,
                context=state.context,
                severity=state.severity,
                token_count=len(window),
            )
        )
        if end == len(tokens):
            break
        start = end - overlap_tokens
        ordinal += 1
    return passages


def filter_low_information(passages: list[Passage], min_tokens: int) -> list[Passage]:
    """Keep passages with at least ``min_tokens`` tokens, order preserved."""
    if min_tokens < 1:
        raise ValueError(f"min_tokens must be positive, got {min_tokens}")
    return [p for p in passages if p.token_count >= min_tokens]
