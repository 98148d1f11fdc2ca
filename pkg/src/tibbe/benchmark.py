"""QA dataset schema: question records, loading, and category balance.

Datasets are line-delimited JSON (``*.tibbeqa.jsonl``), one record per line
with the fields of ``QuestionRecord``. Questions are normally generated from
the fixed template ``What Prophetic remedy is recommended for <ailment>?``;
hand-written questions carry ``"handwritten": true``. Every record must name
its exact source (Sūrah, ḥadīth collection, or chapter citation) so answers
stay traceable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import (
    DuplicateQuestionId,
    EmptyAilment,
    MalformedRecord,
    MissingPath,
    UnknownCategory,
)

DATASET_SUFFIX = ".tibbeqa.jsonl"

QUESTION_TEMPLATE = "What Prophetic remedy is recommended for {ailment}?"


class Category(str, Enum):
    NUTRITIONAL_THERAPIES = "nutritional_therapies"
    HERBAL_REMEDIES = "herbal_remedies"
    RITUAL_SUPPLICATIONS = "ritual_supplications"
    HYGIENE_PRACTICES = "hygiene_practices"
    WOUND_TREATMENTS = "wound_treatments"


_REQUIRED_FIELDS = ("question_id", "question", "ailment", "category",
                    "source_ref", "reference_remedy")


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    question: str
    ailment: str
    category: Category
    source_ref: str
    reference_remedy: str
    handwritten: bool = False

    def __post_init__(self) -> None:
        for name in ("question_id", "question", "ailment", "source_ref", "reference_remedy"):
            if not getattr(self, name).strip():
                raise ValueError(f"question record field {name!r} must be non-empty")

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "ailment": self.ailment,
            "category": self.category.value,
            "source_ref": self.source_ref,
            "reference_remedy": self.reference_remedy,
            "handwritten": self.handwritten,
        }


@dataclass(frozen=True)
class Dataset:
    name: str
    records: tuple[QuestionRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise ValueError("dataset must contain at least one record")
        seen: set[str] = set()
        for record in self.records:
            if record.question_id in seen:
                raise DuplicateQuestionId(f"duplicate question_id {record.question_id!r}")
            seen.add(record.question_id)

    def by_id(self, question_id: str) -> QuestionRecord:
        for record in self.records:
            if record.question_id == question_id:
                return record
        raise KeyError(question_id)


def generate_question(ailment: str) -> str:
    """Instantiate the fixed question template for one ailment."""
    if not ailment.strip():
        raise EmptyAilment("ailment must be non-empty")
    return QUESTION_TEMPLATE.format(ailment=ailment)


def _record_from_line(line_no: int, line: str) -> QuestionRecord:
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    for field_name in _REQUIRED_FIELDS:
        if field_name not in obj:
            raise MalformedRecord(line_no, f"missing field {field_name!r}")
        if not isinstance(obj[field_name], str) or not obj[field_name].strip():
            raise MalformedRecord(line_no, f"field {field_name!r} must be a non-empty string")
    try:
        category = Category(obj["category"])
    except ValueError:
        raise UnknownCategory(
            f"line {line_no}: unknown category {obj['category']!r}"
        ) from None
    handwritten = obj.get("handwritten", False)
    if not isinstance(handwritten, bool):
        raise MalformedRecord(line_no, "field 'handwritten' must be a boolean")
    return QuestionRecord(
        question_id=obj["question_id"],
        question=obj["question"],
        ailment=obj["ailment"],
        category=category,
        source_ref=obj["source_ref"],
        reference_remedy=obj["reference_remedy"],
        handwritten=handwritten,
    )


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a line-delimited dataset file, order preserved."""
    source = Path(path)
    if not source.exists():
        raise MissingPath(f"dataset file does not exist: {source}")
    records: list[QuestionRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(source.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        record = _record_from_line(line_no, line)
        if record.question_id in seen:
            raise DuplicateQuestionId(
                f"line {line_no}: duplicate question_id {record.question_id!r}"
            )
        seen.add(record.question_id)
        records.append(record)
    if not records:
        raise MalformedRecord(0, "dataset file has no records")
    name = source.name
    if name.endswith(DATASET_SUFFIX):
        name = name[: -len(DATASET_SUFFIX)]
    return Dataset(name=name, records=tuple(records))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True)
             for r in dataset.records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def category_balance(dataset: Dataset) -> dict[Category, int]:
    """Record count per category; absent categories report 0."""
    counts = {category: 0 for category in Category}
    for record in dataset.records:
        counts[record.category] += 1
    return counts
