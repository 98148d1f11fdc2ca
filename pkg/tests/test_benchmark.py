from __future__ import annotations

import json

import pytest

from tibbe.benchmark import (
    Category,
    Dataset,
    QuestionRecord,
    category_balance,
    generate_question,
    load_dataset,
    save_dataset,
)
from tibbe.config import packaged_sample_dataset
from tibbe.errors import (
    DuplicateQuestionId,
    EmptyAilment,
    MalformedRecord,
    MissingPath,
    UnknownCategory,
)

from conftest import make_dataset, make_question


# --- generate_question ----------------------------------------------------------

def test_joint_pain_template():
    assert generate_question("joint pain") == \
        "What Prophetic remedy is recommended for joint pain?"


def test_fever_template():
    assert generate_question("fever") == "What Prophetic remedy is recommended for fever?"


def test_empty_ailment():
    with pytest.raises(EmptyAilment):
        generate_question("")


# --- load_dataset -----------------------------------------------------------------

def _record_dict(qid="q1", category="herbal_remedies", **overrides) -> dict:
    d = {
        "question_id": qid,
        "question": generate_question("fever"),
        "ailment": "fever",
        "category": category,
        "source_ref": "Sahih al-Bukhari 5723",
        "reference_remedy": "cool the fever with water",
    }
    d.update(overrides)
    return d


def _write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def test_load_three_valid_lines(tmp_path):
    path = tmp_path / "small.tibbeqa.jsonl"
    _write_jsonl(path, [_record_dict(f"q{i}") for i in range(3)])
    ds = load_dataset(path)
    assert ds.name == "small"
    assert [r.question_id for r in ds.records] == ["q0", "q1", "q2"]


def test_unknown_category_rejected(tmp_path):
    path = _write_jsonl(tmp_path / "d.tibbeqa.jsonl", [_record_dict(category="astrology")])
    with pytest.raises(UnknownCategory):
        load_dataset(path)


def test_duplicate_ids_rejected(tmp_path):
    path = _write_jsonl(tmp_path / "d.tibbeqa.jsonl",
                        [_record_dict("dup"), _record_dict("dup")])
    with pytest.raises(DuplicateQuestionId):
        load_dataset(path)


def test_malformed_json_line_reports_line_number(tmp_path):
    path = tmp_path / "d.tibbeqa.jsonl"
    path.write_text(json.dumps(_record_dict()) + "\nnot json\n", encoding="utf-8")
    with pytest.raises(MalformedRecord) as excinfo:
        load_dataset(path)
    assert excinfo.value.line_no == 2


def test_missing_field_rejected(tmp_path):
    row = _record_dict()
    del row["source_ref"]
    path = _write_jsonl(tmp_path / "d.tibbeqa.jsonl", [row])
    with pytest.raises(MalformedRecord):
        load_dataset(path)


def test_empty_field_rejected(tmp_path):
    path = _write_jsonl(tmp_path / "d.tibbeqa.jsonl", [_record_dict(reference_remedy="  ")])
    with pytest.raises(MalformedRecord):
        load_dataset(path)


def test_missing_file(tmp_path):
    with pytest.raises(MissingPath):
        load_dataset(tmp_path / "none.tibbeqa.jsonl")


def test_round_trip_all_fields(tmp_path):
    records = [
        make_question("q1", "fever"),
        make_question("q2", "toothache", Category.HYGIENE_PRACTICES),
        QuestionRecord(question_id="q3", question="Which food strengthens the heart?",
                       ailment="weak heart", category=Category.NUTRITIONAL_THERAPIES,
                       source_ref="synthetic: test", reference_remedy="dates",
                       handwritten=True),
    ]
    ds = make_dataset(records, name="rt")
    path = tmp_path / "rt.tibbeqa.jsonl"
    save_dataset(ds, path)
    reloaded = load_dataset(path)
    assert reloaded.records == ds.records
    assert reloaded.name == "rt"


def test_template_resubstitution_matches_for_generated_records():
    ds = load_dataset(packaged_sample_dataset())
    for record in ds.records:
        if not record.handwritten:
            assert record.question == generate_question(record.ailment)


# --- category_balance ----------------------------------------------------------------

def test_balanced_fixture_counts_six_each():
    records = []
    for ci, category in enumerate(Category):
        for i in range(6):
            records.append(make_question(f"q{ci}-{i}", f"ailment {ci} {i}", category))
    counts = category_balance(make_dataset(records))
    assert all(count == 6 for count in counts.values())
    assert sum(counts.values()) == 30


def test_singleton_dataset_reports_zeros():
    counts = category_balance(make_dataset([make_question("q1", "fever",
                                                          Category.WOUND_TREATMENTS)]))
    assert counts[Category.WOUND_TREATMENTS] == 1
    assert sum(counts.values()) == 1
    assert sorted(counts) == sorted(Category)


def test_counts_always_sum_to_record_count():
    import random
    rng = random.Random(8)
    categories = list(Category)
    for trial in range(20):
        n = rng.randint(1, 40)
        records = [make_question(f"q{i}", f"ailment {i}", rng.choice(categories))
                   for i in range(n)]
        counts = category_balance(make_dataset(records))
        assert sum(counts.values()) == n


# --- packaged sample -------------------------------------------------------------------

def test_packaged_sample_is_ten_records_two_per_category():
    ds = load_dataset(packaged_sample_dataset())
    assert len(ds.records) == 10
    counts = category_balance(ds)
    assert all(count == 2 for count in counts.values())


def test_packaged_sample_synthetic_records_are_marked():
    ds = load_dataset(packaged_sample_dataset())
    synthetic = [r for r in ds.records if r.source_ref.startswith("synthetic:")]
    assert len(synthetic) >= 1  # never presented as a published benchmark
