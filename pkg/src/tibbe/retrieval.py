"""Dense index build, query, and persistence.

Querying is an exact exhaustive scan: passages are ranked by cosine
similarity to the query (ties broken by passage_id), filtered by a score
threshold and a minimum token count, then deduplicated greedily — a candidate
too similar to an already-selected passage is skipped — and the top k
survivors are returned. ``brute_force_retrieve`` implements the same contract
with independent ranking/dedup code and exists as a cross-check oracle.

Index file format (``save_index``/``load_index``), all integers little-endian:

    bytes 0..7    magic ``TIBBIX`` + 2 ASCII version digits (``TIBBIX01``)
    bytes 8..15   header: u32 dim, u32 entry count
    per entry     u32 length + canonical-JSON passage record,
                  then dim raw float64 values
    trailer       u32 CRC32 over everything before it

Round-trips are bit-exact, including float payloads.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from .corpus import Passage
from .embedding import EmbedderConfig, EmbeddingVector, cosine_similarity, embed_text, embed_texts
from .errors import (
    CorruptIndex,
    DimensionMismatch,
    EmptyCorpus,
    EmptyQuery,
    MissingPath,
    UnsupportedVersion,
)

_MAGIC_PREFIX = b"TIBBIX"
INDEX_VERSION = 1

DEFAULT_K = 4
DEFAULT_SCORE_THRESHOLD = 0.25
DEFAULT_REDUNDANCY_THRESHOLD = 0.95
DEFAULT_MIN_TOKENS = 10


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = DEFAULT_K
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    redundancy_threshold: float = DEFAULT_REDUNDANCY_THRESHOLD
    min_tokens: int = DEFAULT_MIN_TOKENS

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not -1.0 <= self.score_threshold <= 1.0:
            raise ValueError(f"score_threshold must be in [-1, 1], got {self.score_threshold}")
        if not 0.0 < self.redundancy_threshold <= 1.0:
            raise ValueError(
                f"redundancy_threshold must be in (0, 1], got {self.redundancy_threshold}"
            )
        if self.min_tokens < 1:
            raise ValueError(f"min_tokens must be >= 1, got {self.min_tokens}")


@dataclass(frozen=True)
class RetrievedPassage:
    passage: Passage
    score: float
    rank: int

    def to_dict(self) -> dict:
        return {"passage": self.passage.to_dict(), "score": self.score, "rank": self.rank}

    @classmethod
    def from_dict(cls, d: dict) -> "RetrievedPassage":
        return cls(passage=Passage.from_dict(d["passage"]), score=d["score"], rank=d["rank"])


@dataclass(frozen=True)
class IndexedCorpus:
    dim: int
    entries: tuple[tuple[Passage, EmbeddingVector], ...]
    version: int = INDEX_VERSION

    def __post_init__(self) -> None:
        if not self.entries:
            raise EmptyCorpus("an index needs at least one passage")
        seen: set[str] = set()
        for passage, vector in self.entries:
            if vector.dim != self.dim:
                raise DimensionMismatch(
                    f"entry {passage.passage_id} has dim {vector.dim}, index dim {self.dim}"
                )
            if passage.passage_id in seen:
                raise ValueError(f"duplicate passage_id in index: {passage.passage_id}")
            seen.add(passage.passage_id)


def build_index(passages: list[Passage], embedder: EmbedderConfig) -> IndexedCorpus:
    """Embed every passage and assemble the queryable index."""
    if not passages:
        raise EmptyCorpus("cannot build an index from zero passages")
    vectors = embed_texts(embedder, [p.text for p in passages])
    return IndexedCorpus(dim=embedder.dim, entries=tuple(zip(passages, vectors)))


def retrieve(
    index: IndexedCorpus,
    query: str,
    cfg: RetrievalConfig,
    embedder: EmbedderConfig,
) -> list[RetrievedPassage]:
    """Top-k cosine ranking with score thresholding and redundancy filtering."""
    if not query.strip():
        raise EmptyQuery("query is empty")
    if embedder.dim != index.dim:
        raise DimensionMismatch(f"embedder dim {embedder.dim} != index dim {index.dim}")
    query_vec = embed_text(embedder, query)

    candidates = []
    for passage, vector in index.entries:
        score = cosine_similarity(query_vec, vector)
        if score >= cfg.score_threshold and passage.token_count >= cfg.min_tokens:
            candidates.append((score, passage, vector))
    candidates.sort(key=lambda item: (-item[0], item[1].passage_id))

    selected: list[tuple[float, Passage, EmbeddingVector]] = []
    for score, passage, vector in candidates:
        if len(selected) == cfg.k:
            break
        if any(cosine_similarity(vector, kept_vec) > cfg.redundancy_threshold
               for _, _, kept_vec in selected):
            continue
        selected.append((score, passage, vector))

    return [
        RetrievedPassage(passage=passage, score=score, rank=i + 1)
        for i, (score, passage, _) in enumerate(selected)
    ]


def brute_force_retrieve(
    index: IndexedCorpus,
    query: str,
    cfg: RetrievalConfig,
    embedder: EmbedderConfig,
) -> list[RetrievedPassage]:
    """Oracle twin of ``retrieve``: same contract, independent ranking and
    dedup code (repeated max-scan selection instead of sort)."""
    if not query.strip():
        raise EmptyQuery("query is empty")
    if embedder.dim != index.dim:
        raise DimensionMismatch(f"embedder dim {embedder.dim} != index dim {index.dim}")
    query_vec = embed_text(embedder, query)

    pool = []
    for passage, vector in index.entries:
        score = cosine_similarity(query_vec, vector)
        eligible = score >= cfg.score_threshold and passage.token_count >= cfg.min_tokens
        if eligible:
            pool.append({"score": score, "passage": passage, "vector": vector})

    results: list[RetrievedPassage] = []
    kept_vectors: list[EmbeddingVector] = []
    while pool and len(results) < cfg.k:
        best = 0
        for i in range(1, len(pool)):
            better = pool[i]["score"] > pool[best]["score"]
            tied = (
                pool[i]["score"] == pool[best]["score"]
                and pool[i]["passage"].passage_id < pool[best]["passage"].passage_id
            )
            if better or tied:
                best = i
        chosen = pool.pop(best)
        redundant = False
        for kept in kept_vectors:
            if cosine_similarity(chosen["vector"], kept) > cfg.redundancy_threshold:
                redundant = True
                break
        if redundant:
            continue
        kept_vectors.append(chosen["vector"])
        results.append(
            RetrievedPassage(passage=chosen["passage"], score=chosen["score"], rank=len(results) + 1)
        )
    return results


def _passage_record(passage: Passage) -> bytes:
    return json.dumps(passage.to_dict(), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode("ascii")


def save_index(index: IndexedCorpus, path: str | Path) -> None:
    """Persist the index in the binary format described in the module docs."""
    out = bytearray()
    out += _MAGIC_PREFIX + f"{index.version:02d}".encode("ascii")
    out += struct.pack("<II", index.dim, len(index.entries))
    for passage, vector in index.entries:
        record = _passage_record(passage)
        out += struct.pack("<I", len(record))
        out += record
        out += struct.pack(f"<{index.dim}d", *vector.values)
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    target = Path(path)
    try:
        target.write_bytes(bytes(out))
    except FileNotFoundError as exc:
        raise MissingPath(f"cannot write index to {target}: {exc}") from exc


def load_index(path: str | Path) -> IndexedCorpus:
    source = Path(path)
    if not source.exists():
        raise MissingPath(f"index file does not exist: {source}")
    blob = source.read_bytes()
    if len(blob) < 20:
        raise CorruptIndex(f"index file too short ({len(blob)} bytes)")
    if blob[:6] != _MAGIC_PREFIX:
        raise CorruptIndex("bad magic bytes")
    try:
        version = int(blob[6:8].decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise CorruptIndex("unreadable version field") from None
    if version != INDEX_VERSION:
        raise UnsupportedVersion(f"index version {version}, supported: {INDEX_VERSION}")

    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise CorruptIndex("CRC32 mismatch")

    dim, count = struct.unpack("<II", blob[8:16])
    offset = 16
    entries = []
    payload_end = len(blob) - 4
    for _ in range(count):
        if offset + 4 > payload_end:
            raise CorruptIndex("truncated entry header")
        (rec_len,) = struct.unpack("<I", blob[offset : offset + 4])
        offset += 4
        if offset + rec_len + dim * 8 > payload_end:
            raise CorruptIndex("truncated entry payload")
        try:
            record = json.loads(blob[offset : offset + rec_len].decode("ascii"))
            passage = Passage.from_dict(record)
        except (ValueError, KeyError) as exc:
            raise CorruptIndex(f"unreadable passage record: {exc}") from exc
        offset += rec_len
        values = struct.unpack(f"<{dim}d", blob[offset : offset + dim * 8])
        offset += dim * 8
        entries.append((passage, EmbeddingVector(values=values, dim=dim)))
    if offset != payload_end:
        raise CorruptIndex(f"{payload_end - offset} trailing bytes after last entry")
    return IndexedCorpus(dim=dim, entries=tuple(entries), version=version)
