"""Evaluation runner: the questions × bases × modes × judges cross product.

Pipeline tasks (one per question × base backend × mode) run first, then every
final answer is scored by every judge backend. A stage-2 agentic failure or
an unparseable judge marks that sample failed; failed samples are excluded
from aggregation and counted. All persisted output is sorted before writing,
so two runs against scripted backends produce byte-identical artifacts; the
manifest's ``created_at`` field is the only timestamp anywhere in the run
directory.

Run directory layout:

    answers/<base>.jsonl                    one AnswerRecord per line
    scores/<base>__<judge>.jsonl            one SampleScore per line
    scores/criteria__<base>__<judge>.jsonl  optional CriteriaMatrix records
    run.json                                manifest: config echo, digests,
                                            failures, counts, created_at
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .benchmark import Dataset, QuestionRecord
from .config import HarnessConfig
from .errors import CorruptRunData, MissingPath, TibbeError
from .gateway import BackendConfig, LlmGateway
from .judge import (
    CriteriaMatrix,
    SampleScore,
    judge_criteria_matrix,
    make_sample_score,
    score_answer,
)
from .pipeline import (
    MODE_ORDER,
    AnswerRecord,
    Mode,
    PromptTemplates,
    RefinementFailed,
    Stage,
    load_templates,
    run_agentic,
    run_direct,
    run_rag,
)
from .retrieval import IndexedCorpus

MANIFEST_NAME = "run.json"

_STAGE_ORDER = {Stage.DRAFT: 0, Stage.FINAL: 1}


@dataclass(frozen=True)
class FailureRecord:
    question_id: str
    mode: Mode
    base_backend_id: str
    judge_backend_id: str  # empty for pipeline-stage failures
    stage: str             # "pipeline", "judge", or "criteria"
    error: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "mode": self.mode.value,
            "base_backend_id": self.base_backend_id,
            "judge_backend_id": self.judge_backend_id,
            "stage": self.stage,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FailureRecord":
        return cls(
            question_id=d["question_id"],
            mode=Mode(d["mode"]),
            base_backend_id=d["base_backend_id"],
            judge_backend_id=d["judge_backend_id"],
            stage=d["stage"],
            error=d["error"],
        )


@dataclass(frozen=True)
class CriteriaRecord:
    question_id: str
    mode: Mode
    base_backend_id: str
    judge_backend_id: str
    matrix: CriteriaMatrix

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "mode": self.mode.value,
            "base_backend_id": self.base_backend_id,
            "judge_backend_id": self.judge_backend_id,
            "matrix": self.matrix.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriteriaRecord":
        return cls(
            question_id=d["question_id"],
            mode=Mode(d["mode"]),
            base_backend_id=d["base_backend_id"],
            judge_backend_id=d["judge_backend_id"],
            matrix=CriteriaMatrix(**d["matrix"]),
        )


@dataclass
class EvaluationRun:
    dataset_name: str
    modes: tuple[Mode, ...]
    base_ids: tuple[str, ...]
    judge_ids: tuple[str, ...]
    answers: list[AnswerRecord] = field(default_factory=list)
    samples: list[SampleScore] = field(default_factory=list)
    criteria: list[CriteriaRecord] = field(default_factory=list)
    failures: list[FailureRecord] = field(default_factory=list)

    @property
    def total_cells(self) -> int:
        # question x base x mode x judge; derived from what was attempted
        questions = {a.question_id for a in self.answers} | {
            f.question_id for f in self.failures
        }
        return len(questions) * len(self.base_ids) * len(self.modes) * max(1, len(self.judge_ids))

    @property
    def failed_cells(self) -> int:
        count = 0
        judges = max(1, len(self.judge_ids))
        for failure in self.failures:
            if failure.stage == "pipeline":
                count += judges  # the sample is missing from every judge's cell
            elif failure.stage == "judge":
                count += 1
        return count


def _pipeline_task(
    question: QuestionRecord,
    base: BackendConfig,
    mode: Mode,
    cfg: HarnessConfig,
    index: IndexedCorpus | None,
    templates: PromptTemplates,
    gateway: LlmGateway,
) -> list[AnswerRecord]:
    if mode is Mode.DIRECT:
        return [run_direct(question.question, base, templates, gateway,
                           question_id=question.question_id)]
    if index is None:
        raise MissingPath(f"mode {mode.value} needs an index")
    if mode is Mode.RAG:
        return [run_rag(question.question, index, base, templates, cfg.retrieval,
                        cfg.embedder, gateway, question_id=question.question_id,
                        context_budget_tokens=cfg.context_budget_tokens)]
    draft, final = run_agentic(question.question, index, base, templates, cfg.retrieval,
                               cfg.embedder, gateway, question_id=question.question_id,
                               context_budget_tokens=cfg.context_budget_tokens)
    return [draft, final]


def execute_run(
    cfg: HarnessConfig,
    dataset: Dataset,
    index: IndexedCorpus | None,
    modes: list[Mode],
    gateway: LlmGateway | None = None,
) -> EvaluationRun:
    """Run the full cross product and return the in-memory result."""
    cfg.require_eval_backends()
    templates = load_templates(cfg.prompts_dir)
    if gateway is None:
        gateway = LlmGateway(cache_dir=cfg.cache_dir)

    run = EvaluationRun(
        dataset_name=dataset.name,
        modes=tuple(sorted(modes, key=lambda m: MODE_ORDER[m])),
        base_ids=tuple(b.backend_id for b in cfg.base_backends),
        judge_ids=tuple(j.backend_id for j in cfg.judge_backends),
    )

    tasks = [
        (question, base, mode)
        for question in sorted(dataset.records, key=lambda q: q.question_id)
        for base in cfg.base_backends
        for mode in run.modes
    ]

    def run_one(task: tuple[QuestionRecord, BackendConfig, Mode]):
        question, base, mode = task
        try:
            return _pipeline_task(question, base, mode, cfg, index, templates, gateway), None
        except RefinementFailed as exc:
            failure = FailureRecord(
                question_id=question.question_id, mode=mode,
                base_backend_id=base.backend_id, judge_backend_id="",
                stage="pipeline", error=f"{type(exc.cause).__name__}: {exc.cause}",
            )
            return [exc.draft], failure  # keep the draft, never promote it
        except TibbeError as exc:
            failure = FailureRecord(
                question_id=question.question_id, mode=mode,
                base_backend_id=base.backend_id, judge_backend_id="",
                stage="pipeline", error=f"{type(exc).__name__}: {exc}",
            )
            return [], failure

    if cfg.parallelism == 1:
        outcomes = [run_one(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            outcomes = list(pool.map(run_one, tasks))

    for records, failure in outcomes:
        run.answers.extend(records)
        if failure is not None:
            run.failures.append(failure)

    finals = sorted(
        (a for a in run.answers if a.stage is Stage.FINAL),
        key=lambda a: (a.question_id, a.backend_id, MODE_ORDER[a.mode]),
    )

    def judge_one(item: tuple[AnswerRecord, BackendConfig]):
        answer, judge_cfg = item
        question = dataset.by_id(answer.question_id)
        try:
            scores = score_answer(
                gateway, judge_cfg, question.question, answer.text,
                list(answer.retrieved), question.reference_remedy,
                include_passages=cfg.judge_sees_passages,
                include_reference=cfg.judge_sees_reference,
            )
            sample = make_sample_score(answer.question_id, answer.mode,
                                       answer.backend_id, judge_cfg.backend_id, scores)
            return sample, None
        except TibbeError as exc:
            failure = FailureRecord(
                question_id=answer.question_id, mode=answer.mode,
                base_backend_id=answer.backend_id,
                judge_backend_id=judge_cfg.backend_id,
                stage="judge", error=f"{type(exc).__name__}: {exc}",
            )
            return None, failure

    judge_items = [(answer, judge_cfg) for answer in finals for judge_cfg in cfg.judge_backends]
    if cfg.parallelism == 1:
        judged = [judge_one(item) for item in judge_items]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            judged = list(pool.map(judge_one, judge_items))
    for sample, failure in judged:
        if sample is not None:
            run.samples.append(sample)
        if failure is not None:
            run.failures.append(failure)

    if cfg.collect_criteria and cfg.judge_backends:
        criteria_judge = cfg.judge_backends[0]
        for answer in finals:
            question = dataset.by_id(answer.question_id)
            try:
                matrix = judge_criteria_matrix(gateway, criteria_judge,
                                               question.question, answer.text)
                run.criteria.append(CriteriaRecord(
                    question_id=answer.question_id, mode=answer.mode,
                    base_backend_id=answer.backend_id,
                    judge_backend_id=criteria_judge.backend_id, matrix=matrix,
                ))
            except TibbeError as exc:
                run.failures.append(FailureRecord(
                    question_id=answer.question_id, mode=answer.mode,
                    base_backend_id=answer.backend_id,
                    judge_backend_id=criteria_judge.backend_id,
                    stage="criteria", error=f"{type(exc).__name__}: {exc}",
                ))

    run.answers.sort(key=lambda a: (a.question_id, a.backend_id, MODE_ORDER[a.mode],
                                    _STAGE_ORDER[a.stage]))
    run.samples.sort(key=lambda s: (s.base_backend_id, s.judge_backend_id,
                                    s.question_id, MODE_ORDER[s.mode]))
    run.criteria.sort(key=lambda c: (c.base_backend_id, c.judge_backend_id,
                                     c.question_id, MODE_ORDER[c.mode]))
    run.failures.sort(key=lambda f: (f.stage, f.base_backend_id, f.judge_backend_id,
                                     f.question_id, MODE_ORDER[f.mode]))
    return run


def _jsonl_dump(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_run(
    run: EvaluationRun,
    out_dir: str | Path,
    *,
    dataset_path: Path | None = None,
    index_path: Path | None = None,
    config_echo: dict | None = None,
) -> Path:
    """Persist a run; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for base_id in run.base_ids:
        rows = [a.to_dict() for a in run.answers if a.backend_id == base_id]
        _jsonl_dump(rows, out / "answers" / f"{base_id}.jsonl")
    for base_id in run.base_ids:
        for judge_id in run.judge_ids:
            rows = [s.to_dict() for s in run.samples
                    if s.base_backend_id == base_id and s.judge_backend_id == judge_id]
            _jsonl_dump(rows, out / "scores" / f"{base_id}__{judge_id}.jsonl")
    criteria_pairs = sorted({(c.base_backend_id, c.judge_backend_id) for c in run.criteria})
    for base_id, judge_id in criteria_pairs:
        rows = [c.to_dict() for c in run.criteria
                if c.base_backend_id == base_id and c.judge_backend_id == judge_id]
        _jsonl_dump(rows, out / "scores" / f"criteria__{base_id}__{judge_id}.jsonl")

    manifest = {
        "created_at": time.time(),
        "dataset_name": run.dataset_name,
        "dataset_digest": _sha256_file(dataset_path) if dataset_path else "",
        "index_digest": _sha256_file(index_path) if index_path else "",
        "modes": [m.value for m in run.modes],
        "base_backends": list(run.base_ids),
        "judge_backends": list(run.judge_ids),
        "config": config_echo or {},
        "counts": {
            "answers": len(run.answers),
            "samples": len(run.samples),
            "criteria": len(run.criteria),
            "total_cells": run.total_cells,
            "failed_cells": run.failed_cells,
        },
        "failures": [f.to_dict() for f in run.failures],
    }
    manifest_path = out / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
    return manifest_path


def load_run(out_dir: str | Path) -> EvaluationRun:
    """Reload a persisted run for reporting."""
    out = Path(out_dir)
    manifest_path = out / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingPath(f"no {MANIFEST_NAME} in {out}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        run = EvaluationRun(
            dataset_name=manifest["dataset_name"],
            modes=tuple(Mode(m) for m in manifest["modes"]),
            base_ids=tuple(manifest["base_backends"]),
            judge_ids=tuple(manifest["judge_backends"]),
            failures=[FailureRecord.from_dict(f) for f in manifest["failures"]],
        )
        for base_id in run.base_ids:
            answers_path = out / "answers" / f"{base_id}.jsonl"
            if answers_path.exists():
                for line in answers_path.read_text(encoding="utf-8").splitlines():
                    if line.strip():
                        run.answers.append(AnswerRecord.from_dict(json.loads(line)))
            for judge_id in run.judge_ids:
                scores_path = out / "scores" / f"{base_id}__{judge_id}.jsonl"
                if scores_path.exists():
                    for line in scores_path.read_text(encoding="utf-8").splitlines():
                        if line.strip():
                            run.samples.append(SampleScore.from_dict(json.loads(line)))
                criteria_path = out / "scores" / f"criteria__{base_id}__{judge_id}.jsonl"
                if criteria_path.exists():
                    for line in criteria_path.read_text(encoding="utf-8").splitlines():
                        if line.strip():
                            run.criteria.append(CriteriaRecord.from_dict(json.loads(line)))
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptRunData(f"corrupt run data in {out}: {exc}") from exc
    return run
