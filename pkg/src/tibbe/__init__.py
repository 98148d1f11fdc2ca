"""Tibbe: a Prophetic-medicine QA harness.

Answers health questions from a curated remedy corpus under three inference
settings (direct, retrieval-augmented, retrieval plus self-critique) and
scores every answer on the six-criterion 3C3H metric with one or more judge
backends.
"""

__version__ = "0.1.0"

from .benchmark import Category, Dataset, QuestionRecord, generate_question, load_dataset
from .corpus import (
    Passage,
    Severity,
    SourceDocument,
    chunk_document,
    filter_low_information,
    load_documents,
)
from .embedding import EmbedderConfig, EmbeddingVector, Provider, cosine_similarity, embed_text
from .gateway import BackendConfig, BackendKind, ChatMessage, CompletionResult, LlmGateway, Role
from .judge import (
    CriteriaMatrix,
    JudgeScores,
    RunScore,
    SampleScore,
    aggregate_run,
    parse_judge_scores,
    score_sample,
)
from .pipeline import (
    AnswerRecord,
    Mode,
    PromptTemplates,
    Stage,
    run_agentic,
    run_direct,
    run_rag,
    truncate_context,
)
from .retrieval import (
    IndexedCorpus,
    RetrievalConfig,
    RetrievedPassage,
    brute_force_retrieve,
    build_index,
    load_index,
    retrieve,
    save_index,
)

__all__ = [
    "AnswerRecord", "BackendConfig", "BackendKind", "Category", "ChatMessage",
    "CompletionResult", "CriteriaMatrix", "Dataset", "EmbedderConfig",
    "EmbeddingVector", "IndexedCorpus", "JudgeScores", "LlmGateway", "Mode",
    "Passage", "PromptTemplates", "Provider", "QuestionRecord", "RetrievalConfig",
    "RetrievedPassage", "Role", "RunScore", "SampleScore", "Severity",
    "SourceDocument", "Stage", "aggregate_run", "brute_force_retrieve",
    "build_index", "chunk_document", "cosine_similarity", "embed_text",
    "filter_low_information", "generate_question", "load_dataset",
    "load_documents", "load_index", "parse_judge_scores", "retrieve",
    "run_agentic", "run_direct", "run_rag", "save_index", "score_sample",
    "truncate_context",
]
