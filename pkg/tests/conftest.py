from __future__ import annotations

import json
from pathlib import Path

import pytest

from tibbe.benchmark import Category, Dataset, QuestionRecord, load_dataset
from tibbe.corpus import SourceDocument, chunk_document
from tibbe.embedding import EmbedderConfig
from tibbe.retrieval import IndexedCorpus, build_index


def write_corpus_file(directory: Path, filename: str, header: dict[str, str], body: str) -> Path:
    lines = [f"{key}: {value}" for key, value in header.items()]
    path = directory / filename
    path.write_text("\n".join(lines) + "\n\n" + body, encoding="utf-8")
    return path


def write_script(fixtures_dir: Path, entries: list[dict]) -> Path:
    fixtures_dir.mkdir(parents=True, exist_ok=True)
    script = fixtures_dir / "script.jsonl"
    with open(script, "w", encoding="utf-8", newline="\n") as handle:
        for entry in entries:
            handle.write(json.dumps(entry) + "\n")
    return script


def make_passages(texts: list[str], doc_id: str = "doc") -> list:
    body = None  # one passage per text via per-doc chunking
    passages = []
    for i, text in enumerate(texts):
        doc = SourceDocument(doc_id=f"{doc_id}{i:02d}", title=f"t{i}", origin="test", body=text)
        passages.extend(chunk_document(doc, max_tokens=512, overlap_tokens=0))
    return passages


@pytest.fixture()
def local_embedder() -> EmbedderConfig:
    return EmbedderConfig()


@pytest.fixture()
def small_index(local_embedder) -> IndexedCorpus:
    texts = [
        "honey cures digestive complaints take one to two teaspoons of raw honey daily",
        "black seed ground with honey treats stomach worms and eases kidney stones",
        "the miswak cleans the mouth use it before every prayer and on waking",
        "for minor burns cool with clean water then dress the burn lightly with honey",
        "supplication and remembrance settle anxiety and distress of the heart",
    ]
    return build_index(make_passages(texts), local_embedder)


def make_question(question_id: str, ailment: str, category: Category = Category.HERBAL_REMEDIES,
                  reference: str = "reference remedy") -> QuestionRecord:
    from tibbe.benchmark import generate_question

    return QuestionRecord(
        question_id=question_id,
        question=generate_question(ailment),
        ailment=ailment,
        category=category,
        source_ref="synthetic: test fixture",
        reference_remedy=reference,
    )


def make_dataset(records: list[QuestionRecord], name: str = "test") -> Dataset:
    return Dataset(name=name, records=tuple(records))


# --- end-to-end fixture: scripted base + judge over the packaged sample ---------

JUDGE_PAYLOADS = {
    # direct: (1 + 0 + 0.5 + 0.5 + 0 + 0.5) / 6 = 2.5/6
    "direct": {"correctness": 1, "completeness": 0, "conciseness": 3, "helpfulness": 3,
               "harmlessness": 1, "honesty": 3, "rationale": "no sources"},
    # rag: 3.5/6
    "rag": {"correctness": 1, "completeness": 1, "conciseness": 3, "helpfulness": 3,
            "harmlessness": 1, "honesty": 3, "rationale": "cited"},
    # agentic: 4.5/6
    "agentic": {"correctness": 1, "completeness": 1, "conciseness": 3, "helpfulness": 3,
                "harmlessness": 5, "honesty": 3, "rationale": "cited and safe"},
}


def base_response(question_id: str, step: str) -> str:
    if step == "direct":
        return f"A general suggestion for {question_id} without any sources."
    if step == "rag":
        return f"Remedy for {question_id} as narrated in the retrieved sources."
    if step == "draft":
        return f"Draft remedy for {question_id} drawn from the sources."
    return f"Validated remedy for {question_id}. Safety: consult a clinician first."


def build_eval_fixture(root: Path, *, cache: bool = False) -> dict:
    """Scripted-fixture tree for a deterministic eval over the packaged sample.

    Script entry order assumes parallelism=1: pipeline tasks sorted by
    (question_id, base, mode) with agentic issuing draft then final; judging
    sorted by (question_id, base, mode).
    """
    from tibbe.config import packaged_sample_corpus, packaged_sample_dataset
    from tibbe.corpus import chunk_document, load_documents
    from tibbe.retrieval import build_index, save_index

    root.mkdir(parents=True, exist_ok=True)
    docs = load_documents(packaged_sample_corpus())
    passages = []
    for doc in docs:
        passages.extend(chunk_document(doc))
    index_path = root / "sample.idx"
    save_index(build_index(passages, EmbedderConfig()), index_path)

    dataset_path = packaged_sample_dataset()
    question_ids = sorted(r.question_id for r in load_dataset(dataset_path).records)

    base_entries = []
    judge_entries = []
    for qid in question_ids:
        for step in ("direct", "rag", "draft", "final"):
            base_entries.append({"response": base_response(qid, step)})
        for mode in ("direct", "rag", "agentic"):
            judge_entries.append({"response": json.dumps(JUDGE_PAYLOADS[mode])})
    write_script(root / "fixtures" / "base", base_entries)
    write_script(root / "fixtures" / "judge", judge_entries)

    config_lines = [
        "[harness]",
        "parallelism = 1",
    ]
    if cache:
        config_lines.append("cache_dir = cache")
    config_lines += [
        "",
        "[embedder]",
        "provider = deterministic-local",
        "dim = 64",
        "",
        "[retrieval]",
        "k = 2",
        "score_threshold = 0.05",
        "min_tokens = 5",
        "",
        "[backend.base-x]",
        "role = base",
        "kind = scripted",
        "fixtures_dir = fixtures/base",
        "",
        "[backend.judge-x]",
        "role = judge",
        "kind = scripted",
        "fixtures_dir = fixtures/judge",
    ]
    config_path = root / "config.ini"
    config_path.write_text("\n".join(config_lines) + "\n", encoding="utf-8")
    return {
        "config": config_path,
        "dataset": dataset_path,
        "index": index_path,
        "question_ids": question_ids,
    }
