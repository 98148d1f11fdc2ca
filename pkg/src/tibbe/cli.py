"""Command-line entry point.

Subcommands: ``ingest`` (corpus -> index), ``ask`` (one question, any mode),
``eval`` (full cross product over a dataset), ``report`` (artifacts from a
run directory). Results go to stdout, diagnostics to stderr.

Exit codes are stable: 0 success, 2 usage/config errors, 3 corpus/dataset/run
data errors, 4 I/O errors, 5 backend failures (or an eval with more than 10%
failed cells).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .benchmark import load_dataset
from .config import HarnessConfig, default_config, load_config
from .corpus import chunk_document, filter_low_information, load_documents
from .errors import (
    BackendUnavailable,
    ConfigError,
    CorruptIndex,
    CorruptRunData,
    DuplicateDocId,
    DuplicateQuestionId,
    EmptyCorpus,
    EmptyQuery,
    EmptyRun,
    FixtureMiss,
    IncompleteModes,
    InvalidChunkParams,
    JudgeParseFailed,
    MalformedDocument,
    MalformedRecord,
    MissingPath,
    OverlongPrompt,
    RemoteUnavailable,
    TibbeError,
    UnknownCategory,
    UnsupportedVersion,
)
from .figures import render_gains_figure, render_grid_figure
from .gateway import LlmGateway
from .pipeline import (
    Mode,
    RefinementFailed,
    load_templates,
    run_agentic,
    run_direct,
    run_rag,
)
from .report import build_gains, build_grid, criteria_summary, emit
from .retrieval import build_index, load_index, save_index
from .runner import execute_run, load_run, save_run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4
EXIT_BACKEND = 5

_CONFIG_ERRORS = (ConfigError, EmptyQuery)
_DATA_ERRORS = (
    MissingPath, EmptyCorpus, DuplicateDocId, MalformedDocument, InvalidChunkParams,
    MalformedRecord, UnknownCategory, DuplicateQuestionId,
    CorruptIndex, UnsupportedVersion, CorruptRunData, EmptyRun,
)
_BACKEND_ERRORS = (BackendUnavailable, FixtureMiss, JudgeParseFailed,
                   RemoteUnavailable, OverlongPrompt, RefinementFailed)


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _classify(exc: Exception) -> int:
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, _BACKEND_ERRORS):
        return EXIT_BACKEND
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_DATA
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_DATA


def _load_config_arg(config_path: str | None) -> HarnessConfig:
    if config_path:
        return load_config(config_path)
    return default_config()


def _config_echo(cfg: HarnessConfig) -> dict:
    return {
        "embedder": {"provider": cfg.embedder.provider.value, "dim": cfg.embedder.dim,
                     "model_name": cfg.embedder.model_name},
        "retrieval": asdict(cfg.retrieval),
        "parallelism": cfg.parallelism,
        "context_budget_tokens": cfg.context_budget_tokens,
        "judge_sees_passages": cfg.judge_sees_passages,
        "judge_sees_reference": cfg.judge_sees_reference,
        "base_backends": [{"backend_id": b.backend_id, "kind": b.kind.value,
                           "model_name": b.model_name} for b in cfg.base_backends],
        "judge_backends": [{"backend_id": j.backend_id, "kind": j.kind.value,
                            "model_name": j.model_name} for j in cfg.judge_backends],
    }


# --- subcommands -------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _load_config_arg(args.config)
    docs = load_documents(args.corpus)
    passages = []
    for doc in docs:
        passages.extend(chunk_document(doc, cfg.corpus.max_tokens, cfg.corpus.overlap_tokens))
    passages = filter_low_information(passages, cfg.corpus.drop_below_tokens)
    if not passages:
        raise EmptyCorpus("chunking produced no passages")
    index = build_index(passages, cfg.embedder)
    try:
        save_index(index, args.index)
    except (MissingPath, OSError) as exc:
        return _fail(EXIT_IO, f"cannot write index: {exc}")
    print(f"indexed {len(index.entries)} passages (dim {index.dim}) -> {args.index}")
    return EXIT_OK


def cmd_ask(args: argparse.Namespace) -> int:
    cfg = _load_config_arg(args.config)
    mode = Mode(args.mode)
    if mode in (Mode.RAG, Mode.AGENTIC) and not args.index:
        return _fail(EXIT_CONFIG, f"--mode {mode.value} requires --index")
    if not cfg.base_backends:
        return _fail(EXIT_CONFIG, "no base backend configured")
    backend = cfg.backend(args.backend) if args.backend else cfg.base_backends[0]
    templates = load_templates(cfg.prompts_dir)
    gateway = LlmGateway(cache_dir=cfg.cache_dir)

    if mode is Mode.DIRECT:
        record = run_direct(args.question, backend, templates, gateway)
        draft = None
    else:
        index = load_index(args.index)
        if mode is Mode.RAG:
            record = run_rag(args.question, index, backend, templates, cfg.retrieval,
                             cfg.embedder, gateway,
                             context_budget_tokens=cfg.context_budget_tokens)
            draft = None
        else:
            draft, record = run_agentic(args.question, index, backend, templates,
                                        cfg.retrieval, cfg.embedder, gateway,
                                        context_budget_tokens=cfg.context_budget_tokens)

    if args.show_draft and draft is not None:
        print("=== draft ===")
        print(draft.text)
        print()
        print("=== final ===")
    print(record.text)
    if record.retrieved:
        print()
        print("Citations:")
        for item in record.retrieved:
            print(f"  [{item.rank}] {item.passage.citation} (score={item.score:.3f})")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config_arg(args.config)
    cfg.require_eval_backends()
    dataset = load_dataset(args.dataset)
    modes = [Mode(m.strip()) for m in args.modes.split(",") if m.strip()]
    if not modes:
        return _fail(EXIT_CONFIG, "--modes is empty")
    index = None
    index_path = None
    if any(m in (Mode.RAG, Mode.AGENTIC) for m in modes):
        if not args.index:
            return _fail(EXIT_CONFIG, "rag/agentic modes require --index")
        index_path = Path(args.index)
        index = load_index(index_path)

    run = execute_run(cfg, dataset, index, modes)
    save_run(run, args.out, dataset_path=Path(args.dataset), index_path=index_path,
             config_echo=_config_echo(cfg))
    total = run.total_cells
    failed = run.failed_cells
    print(f"scored {len(run.samples)} samples over {total} cells "
          f"({len(run.answers)} answers, {failed} failed cells) -> {args.out}")
    for failure in run.failures:
        print(f"warning: {failure.stage} failure {failure.question_id}/"
              f"{failure.mode.value}/{failure.base_backend_id}"
              f"{'/' + failure.judge_backend_id if failure.judge_backend_id else ''}: "
              f"{failure.error}", file=sys.stderr)
    if total and failed / total > 0.10:
        return _fail(EXIT_BACKEND, f"{failed}/{total} cells failed (>10%)")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run = load_run(args.run_dir)
    if not run.samples:
        raise EmptyRun(f"run in {args.run_dir} has no scored samples")
    grid = build_grid(run)

    base_id = args.gains_base or (run.base_ids[0] if run.base_ids else "")
    judge_id = args.gains_judge or (run.judge_ids[0] if run.judge_ids else "")
    gains = None
    try:
        gains = build_gains(run, base_id, judge_id)
    except (IncompleteModes, EmptyRun) as exc:
        print(f"warning: gains omitted: {exc}", file=sys.stderr)

    formats = {"markdown", "csv"} if args.format == "all" else {args.format}
    written = emit(grid, gains, criteria_summary(run), args.run_dir, formats)
    written.append(render_grid_figure(grid, args.run_dir))
    if gains is not None:
        written.append(render_gains_figure(gains, args.run_dir))
    for path in written:
        print(path)
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tibbe",
        description="Prophetic-medicine QA harness: retrieval, self-critique, 3C3H evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="chunk a corpus directory and build the index")
    p_ingest.add_argument("--corpus", required=True, help="corpus directory of *.tibb.txt files")
    p_ingest.add_argument("--index", required=True, help="output index file")
    p_ingest.add_argument("--config", default=None, help="harness config file")
    p_ingest.set_defaults(func=cmd_ingest)

    p_ask = sub.add_parser("ask", help="answer one question")
    p_ask.add_argument("--question", required=True)
    p_ask.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.RAG.value)
    p_ask.add_argument("--index", default=None, help="index file (rag/agentic)")
    p_ask.add_argument("--config", default=None)
    p_ask.add_argument("--backend", default=None, help="base backend id (default: first configured)")
    p_ask.add_argument("--show-draft", action="store_true",
                       help="also print the agentic draft")
    p_ask.set_defaults(func=cmd_ask)

    p_eval = sub.add_parser("eval", help="run the full evaluation cross product")
    p_eval.add_argument("--dataset", required=True, help="*.tibbeqa.jsonl dataset file")
    p_eval.add_argument("--modes", default="direct,rag,agentic",
                        help="comma-separated subset of direct,rag,agentic")
    p_eval.add_argument("--index", default=None)
    p_eval.add_argument("--out", required=True, help="run output directory")
    p_eval.add_argument("--config", default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_report = sub.add_parser("report", help="emit report artifacts from a run directory")
    p_report.add_argument("--in", dest="run_dir", required=True, help="run directory")
    p_report.add_argument("--format", choices=["markdown", "csv", "all"], default="all")
    p_report.add_argument("--gains-base", default="", help="base backend for the gain series")
    p_report.add_argument("--gains-judge", default="", help="judge backend for the gain series")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TibbeError as exc:
        return _fail(_classify(exc), f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))


if __name__ == "__main__":
    sys.exit(main())
