"""The three inference settings: direct, RAG, and agentic self-critique.

Direct sends the bare question. RAG prepends the top-k retrieved passages and
extract-and-summarize instructions. Agentic runs the RAG step to produce a
draft, then sends a second, validation prompt containing the question, the
same passages, and the full draft verbatim, instructing the model to
fact-check the draft against the passages, add mechanistic context, and
filter or flag unsafe recommendations. The two stages of one agentic run are
strictly sequential; a stage-2 failure is a failed sample, never a silent
promotion of the draft.

Prompt wording lives in a prompts directory (``answer_system.txt``,
``answer_user.txt``, ``validation_user.txt``, ``direct_user.txt``) with
``{{slot}}`` markers, so it is auditable and swappable without code changes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .embedding import EmbedderConfig
from .errors import ConfigError, EmptyQuery, MissingPath, TibbeError
from .gateway import BackendConfig, ChatMessage, LlmGateway, system, user
from .retrieval import IndexedCorpus, RetrievalConfig, RetrievedPassage, retrieve

NO_PASSAGES_MARKER = "[no passages retrieved]"

DEFAULT_CONTEXT_BUDGET_TOKENS = 2048

TEMPLATE_FILES = {
    "answer_system": "answer_system.txt",
    "answer_user": "answer_user.txt",
    "validation_user": "validation_user.txt",
    "direct_user": "direct_user.txt",
}

_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")


class Mode(str, Enum):
    DIRECT = "direct"
    RAG = "rag"
    AGENTIC = "agentic"


MODE_ORDER = {Mode.DIRECT: 0, Mode.RAG: 1, Mode.AGENTIC: 2}


class Stage(str, Enum):
    DRAFT = "draft"
    FINAL = "final"


@dataclass(frozen=True)
class PromptTemplates:
    answer_system: str
    answer_user: str
    validation_user: str
    direct_user: str

    def __post_init__(self) -> None:
        required = {
            "answer_user": {"question", "passages"},
            "validation_user": {"question", "passages", "draft"},
            "direct_user": {"question"},
        }
        for name, slots in required.items():
            text = getattr(self, name)
            found = set(_SLOT_RE.findall(text))
            missing = slots - found
            if missing:
                raise ConfigError(f"template {name} is missing slots: {sorted(missing)}")


def load_templates(prompts_dir: str | Path) -> PromptTemplates:
    root = Path(prompts_dir)
    if not root.is_dir():
        raise MissingPath(f"prompts directory does not exist: {root}")
    texts = {}
    for attr, filename in TEMPLATE_FILES.items():
        path = root / filename
        if not path.exists():
            raise MissingPath(f"missing prompt template: {path}")
        texts[attr] = path.read_text(encoding="utf-8")
    return PromptTemplates(**texts)


def render(template: str, **slots: str) -> str:
    """Substitute ``{{name}}`` markers; any marker left unbound is an error."""
    out = template
    for name, value in slots.items():
        out = out.replace("{{" + name + "}}", value)
    leftover = _SLOT_RE.findall(out)
    if leftover:
        raise ConfigError(f"unbound template slots: {sorted(set(leftover))}")
    return out


def format_passages(retrieved: Sequence[RetrievedPassage]) -> str:
    """Render retrieved passages for a prompt, rank order, citation included."""
    if not retrieved:
        return NO_PASSAGES_MARKER
    blocks = []
    for item in retrieved:
        p = item.passage
        blocks.append(
            f"[{item.rank}] citation: {p.citation} | severity: {p.severity.value}\n{p.text}"
        )
    return "\n\n".join(blocks)


def truncate_context(
    passages: Sequence[RetrievedPassage], budget_tokens: int
) -> list[RetrievedPassage]:
    """Keep the rank-order prefix whose cumulative token count fits the budget."""
    kept: list[RetrievedPassage] = []
    total = 0
    for item in passages:
        if total + item.passage.token_count > budget_tokens:
            break
        kept.append(item)
        total += item.passage.token_count
    return kept


@dataclass(frozen=True)
class AnswerRecord:
    question_id: str
    mode: Mode
    stage: Stage
    text: str
    retrieved: tuple[RetrievedPassage, ...]
    backend_id: str
    prompt_fingerprint: str
    draft_fingerprint: str = ""  # agentic final records point back at their draft

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "mode": self.mode.value,
            "stage": self.stage.value,
            "text": self.text,
            "retrieved": [r.to_dict() for r in self.retrieved],
            "backend_id": self.backend_id,
            "prompt_fingerprint": self.prompt_fingerprint,
            "draft_fingerprint": self.draft_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnswerRecord":
        return cls(
            question_id=d["question_id"],
            mode=Mode(d["mode"]),
            stage=Stage(d["stage"]),
            text=d["text"],
            retrieved=tuple(RetrievedPassage.from_dict(r) for r in d["retrieved"]),
            backend_id=d["backend_id"],
            prompt_fingerprint=d["prompt_fingerprint"],
            draft_fingerprint=d.get("draft_fingerprint", ""),
        )


class RefinementFailed(TibbeError):
    """Agentic stage 2 failed after retries; carries the surviving draft.

    The draft is never promoted to a final answer, but callers may persist it
    for forensics."""

    def __init__(self, draft: "AnswerRecord", cause: Exception):
        super().__init__(f"self-critique stage failed: {cause}")
        self.draft = draft
        self.cause = cause


def _require_question(question: str) -> str:
    if not question.strip():
        raise EmptyQuery("question is empty")
    return question


def run_direct(
    question: str,
    backend: BackendConfig,
    templates: PromptTemplates,
    gateway: LlmGateway,
    *,
    question_id: str = "adhoc",
) -> AnswerRecord:
    """Answer from the question alone, no retrieval."""
    _require_question(question)
    messages = [
        system(templates.answer_system),
        user(render(templates.direct_user, question=question)),
    ]
    result = gateway.complete(backend, messages)
    return AnswerRecord(
        question_id=question_id,
        mode=Mode.DIRECT,
        stage=Stage.FINAL,
        text=result.text,
        retrieved=(),
        backend_id=backend.backend_id,
        prompt_fingerprint=result.prompt_fingerprint,
    )


def _retrieve_context(
    question: str,
    index: IndexedCorpus,
    retrieval_cfg: RetrievalConfig,
    embedder: EmbedderConfig,
    context_budget_tokens: int,
) -> tuple[RetrievedPassage, ...]:
    retrieved = retrieve(index, question, retrieval_cfg, embedder)
    return tuple(truncate_context(retrieved, context_budget_tokens))


def _answer_messages(
    question: str, templates: PromptTemplates, retrieved: Sequence[RetrievedPassage]
) -> list[ChatMessage]:
    return [
        system(templates.answer_system),
        user(render(templates.answer_user, question=question,
                    passages=format_passages(retrieved))),
    ]


def run_rag(
    question: str,
    index: IndexedCorpus,
    backend: BackendConfig,
    templates: PromptTemplates,
    retrieval_cfg: RetrievalConfig,
    embedder: EmbedderConfig,
    gateway: LlmGateway,
    *,
    question_id: str = "adhoc",
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET_TOKENS,
) -> AnswerRecord:
    """Retrieval-augmented answer: one completion over question + passages."""
    _require_question(question)
    retrieved = _retrieve_context(question, index, retrieval_cfg, embedder,
                                  context_budget_tokens)
    result = gateway.complete(backend, _answer_messages(question, templates, retrieved))
    return AnswerRecord(
        question_id=question_id,
        mode=Mode.RAG,
        stage=Stage.FINAL,
        text=result.text,
        retrieved=retrieved,
        backend_id=backend.backend_id,
        prompt_fingerprint=result.prompt_fingerprint,
    )


def run_agentic(
    question: str,
    index: IndexedCorpus,
    backend: BackendConfig,
    templates: PromptTemplates,
    retrieval_cfg: RetrievalConfig,
    embedder: EmbedderConfig,
    gateway: LlmGateway,
    *,
    question_id: str = "adhoc",
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET_TOKENS,
) -> tuple[AnswerRecord, AnswerRecord]:
    """Two-stage answer: a RAG draft, then a self-critique pass over it.

    Returns ``(draft, final)``. Exactly two completions are issued; both
    records share the retrieval provenance.
    """
    _require_question(question)
    retrieved = _retrieve_context(question, index, retrieval_cfg, embedder,
                                  context_budget_tokens)

    draft_result = gateway.complete(backend, _answer_messages(question, templates, retrieved))
    draft = AnswerRecord(
        question_id=question_id,
        mode=Mode.AGENTIC,
        stage=Stage.DRAFT,
        text=draft_result.text,
        retrieved=retrieved,
        backend_id=backend.backend_id,
        prompt_fingerprint=draft_result.prompt_fingerprint,
    )

    validation = [
        system(templates.answer_system),
        user(render(templates.validation_user, question=question,
                    passages=format_passages(retrieved), draft=draft.text)),
    ]
    try:
        final_result = gateway.complete(backend, validation)
    except TibbeError as exc:
        raise RefinementFailed(draft, exc) from exc
    final = AnswerRecord(
        question_id=question_id,
        mode=Mode.AGENTIC,
        stage=Stage.FINAL,
        text=final_result.text,
        retrieved=retrieved,
        backend_id=backend.backend_id,
        prompt_fingerprint=final_result.prompt_fingerprint,
        draft_fingerprint=draft.prompt_fingerprint,
    )
    return draft, final
