from __future__ import annotations

import random

import pytest

from tibbe.corpus import (
    Severity,
    SourceDocument,
    chunk_document,
    count_tokens,
    filter_low_information,
    load_documents,
    tokenize,
)
from tibbe.errors import (
    DuplicateDocId,
    EmptyCorpus,
    InvalidChunkParams,
    MalformedDocument,
    MissingPath,
)

from conftest import write_corpus_file


def _doc(body: str, **overrides) -> SourceDocument:
    fields = dict(doc_id="d1", title="title", origin="origin", body=body)
    fields.update(overrides)
    return SourceDocument(**fields)


# --- load_documents ---------------------------------------------------------

def test_load_two_wellformed_files_in_filename_order(tmp_path):
    write_corpus_file(tmp_path, "b.tibb.txt", {"doc_id": "doc-b", "title": "B"}, "body of b")
    write_corpus_file(tmp_path, "a.tibb.txt", {"doc_id": "doc-a", "title": "A"}, "body of a")
    docs = load_documents(tmp_path)
    assert [d.doc_id for d in docs] == ["doc-a", "doc-b"]
    assert docs[0].title == "A"
    assert docs[0].body.strip() == "body of a"


def test_load_empty_directory_is_empty_corpus(tmp_path):
    with pytest.raises(EmptyCorpus):
        load_documents(tmp_path)


def test_load_missing_directory_is_missing_path(tmp_path):
    with pytest.raises(MissingPath):
        load_documents(tmp_path / "nope")


def test_duplicate_doc_ids_rejected(tmp_path):
    write_corpus_file(tmp_path, "a.tibb.txt", {"doc_id": "tibb-ch3"}, "body one")
    write_corpus_file(tmp_path, "b.tibb.txt", {"doc_id": "tibb-ch3"}, "body two")
    with pytest.raises(DuplicateDocId):
        load_documents(tmp_path)


def test_unknown_header_key_is_malformed(tmp_path):
    write_corpus_file(tmp_path, "a.tibb.txt", {"doc_id": "d", "flavour": "x"}, "body")
    with pytest.raises(MalformedDocument):
        load_documents(tmp_path)


def test_missing_blank_line_is_malformed(tmp_path):
    (tmp_path / "a.tibb.txt").write_text("doc_id: d\ntitle: t", encoding="utf-8")
    with pytest.raises(MalformedDocument):
        load_documents(tmp_path)


def test_empty_body_is_malformed(tmp_path):
    write_corpus_file(tmp_path, "a.tibb.txt", {"doc_id": "d"}, "   \n  ")
    with pytest.raises(MalformedDocument):
        load_documents(tmp_path)


def test_invalid_severity_header_is_malformed(tmp_path):
    write_corpus_file(tmp_path, "a.tibb.txt", {"doc_id": "d", "severity": "fatal"}, "body")
    with pytest.raises(MalformedDocument):
        load_documents(tmp_path)


def test_non_corpus_files_ignored(tmp_path):
    write_corpus_file(tmp_path, "a.tibb.txt", {"doc_id": "d"}, "body here")
    (tmp_path / "notes.txt").write_text("not a corpus file", encoding="utf-8")
    assert len(load_documents(tmp_path)) == 1


# --- chunk_document -----------------------------------------------------------

def test_no_split_when_body_fits():
    body = " ".join(f"tok{i}" for i in range(100))
    passages = chunk_document(_doc(body), max_tokens=100, overlap_tokens=0)
    assert len(passages) == 1
    assert passages[0].text == body
    assert passages[0].token_count == 100
    assert passages[0].passage_id == "d1#0000"


def test_250_tokens_chunk_to_100_100_50():
    # oracle: recount every chunk with the whitespace tokenizer
    body = " ".join(f"tok{i}" for i in range(250))
    passages = chunk_document(_doc(body), max_tokens=100, overlap_tokens=0)
    assert [p.token_count for p in passages] == [100, 100, 50]
    assert [len(tokenize(p.text)) for p in passages] == [100, 100, 50]


def test_overlap_equal_to_max_rejected():
    with pytest.raises(InvalidChunkParams):
        chunk_document(_doc("a b c"), max_tokens=50, overlap_tokens=50)


def test_overlap_reconstructs_token_stream():
    rng = random.Random(7)
    for trial in range(25):
        n = rng.randint(1, 400)
        max_tokens = rng.randint(2, 80)
        overlap = rng.randint(0, max_tokens - 1)
        body = " ".join(f"w{rng.randint(0, 30)}" for _ in range(n))
        passages = chunk_document(_doc(body), max_tokens=max_tokens, overlap_tokens=overlap)
        rebuilt: list[str] = []
        for i, passage in enumerate(passages):
            toks = tokenize(passage.text)
            rebuilt.extend(toks if i == 0 else toks[overlap:])
        assert rebuilt == tokenize(body), (n, max_tokens, overlap)
        assert all(p.token_count <= max_tokens for p in passages)


def test_chunking_is_deterministic():
    body = " ".join(f"w{i % 17}" for i in range(300))
    first = chunk_document(_doc(body), 60, 10)
    second = chunk_document(_doc(body), 60, 10)
    assert first == second
    assert [p.passage_id for p in first] == [f"d1#{i:04d}" for i in range(len(first))]


def test_citation_markers_override_and_are_stripped():
    body = (
        "intro words before any marker "
        "[[cite: chapter two]] these words follow the marker "
        "[[severity: caution]] and these carry the caution"
    )
    doc = _doc(body, default_citation="chapter one")
    passages = chunk_document(doc, max_tokens=5, overlap_tokens=0)
    assert "[[" not in " ".join(p.text for p in passages)
    assert passages[0].citation == "chapter one"
    # starts at "these words follow..." after the cite marker
    assert passages[1].citation == "chapter two"
    assert passages[1].severity is Severity.INFORMATIONAL
    last = passages[-1]
    assert last.severity is Severity.CAUTION
    assert last.citation == "chapter two"


def test_citation_falls_back_to_doc_id():
    passages = chunk_document(_doc("some body text"), 100, 0)
    assert passages[0].citation == "d1"
    assert passages[0].context == "title"


def test_invalid_severity_marker_is_malformed():
    with pytest.raises(MalformedDocument):
        chunk_document(_doc("a [[severity: deadly]] b"), 100, 0)


# --- filter_low_information ----------------------------------------------------

def _fixed_passages(counts: list[int]):
    doc = _doc(" ".join(f"t{i}" for i in range(sum(counts))))
    out = []
    start = 0
    for i, n in enumerate(counts):
        body = " ".join(f"t{j}" for j in range(start, start + n))
        out.extend(chunk_document(_doc(body, doc_id=f"p{i}"), max_tokens=512, overlap_tokens=0))
        start += n
    return out


def test_filter_keeps_only_passages_at_or_above_threshold():
    passages = _fixed_passages([3, 40, 7])
    kept = filter_low_information(passages, min_tokens=10)
    assert [p.token_count for p in kept] == [40]


def test_filter_with_min_one_is_identity():
    passages = _fixed_passages([3, 40, 7])
    assert filter_low_information(passages, min_tokens=1) == passages


def test_filter_empty_input():
    assert filter_low_information([], min_tokens=5) == []


def test_filter_is_idempotent():
    passages = _fixed_passages([3, 12, 9, 40, 10])
    once = filter_low_information(passages, min_tokens=10)
    assert filter_low_information(once, min_tokens=10) == once


def test_token_count_matches_tokenizer_everywhere():
    body = "  multiple   spaces\tand\nnewlines   between words  "
    passages = chunk_document(_doc(body), 3, 1)
    for p in passages:
        assert p.token_count == count_tokens(p.text) > 0
