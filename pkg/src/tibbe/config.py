"""Harness configuration: defaults, and the INI-style config file.

A config file mirrors ``HarnessConfig`` with one section per concern plus one
``[backend.<id>]`` section per backend. Relative paths are resolved against
the config file's directory. Secrets never live in the file: API keys come
from ``TIBBE_LLM_API_KEY_<BACKEND_ID>`` and ``TIBBE_EMBED_API_KEY``.

    [harness]
    parallelism = 1
    cache_dir = .tibbe-cache
    context_budget_tokens = 2048
    judge_sees_passages = true
    judge_sees_reference = true
    collect_criteria = false

    [embedder]
    provider = deterministic-local
    dim = 64

    [retrieval]
    k = 4
    score_threshold = 0.25
    redundancy_threshold = 0.95
    min_tokens = 10

    [corpus]
    max_tokens = 180
    overlap_tokens = 30

    [backend.demo]
    role = base
    kind = echo
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .corpus import DEFAULT_MAX_TOKENS, DEFAULT_OVERLAP_TOKENS
from .embedding import EmbedderConfig, Provider
from .errors import ConfigError
from .gateway import BackendConfig, BackendKind
from .pipeline import DEFAULT_CONTEXT_BUDGET_TOKENS
from .retrieval import RetrievalConfig


def packaged_prompts_dir() -> Path:
    return Path(str(resources.files("tibbe").joinpath("prompts")))


def packaged_sample_dataset() -> Path:
    return Path(str(resources.files("tibbe").joinpath("data/sample/questions.tibbeqa.jsonl")))


def packaged_sample_corpus() -> Path:
    return Path(str(resources.files("tibbe").joinpath("data/sample/corpus")))


@dataclass
class CorpusConfig:
    max_tokens: int = DEFAULT_MAX_TOKENS
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS
    drop_below_tokens: int = 1  # ingest-time low-information filter


@dataclass
class HarnessConfig:
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    base_backends: list[BackendConfig] = field(default_factory=list)
    judge_backends: list[BackendConfig] = field(default_factory=list)
    prompts_dir: Path = field(default_factory=packaged_prompts_dir)
    cache_dir: Path | None = None
    parallelism: int = 1
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET_TOKENS
    judge_sees_passages: bool = True
    judge_sees_reference: bool = True
    collect_criteria: bool = False
    gains_base: str = ""   # defaults to the first base backend
    gains_judge: str = ""  # defaults to the first judge backend

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def backend(self, backend_id: str) -> BackendConfig:
        for cfg in self.base_backends + self.judge_backends:
            if cfg.backend_id == backend_id:
                return cfg
        raise ConfigError(f"no backend configured with id {backend_id!r}")

    def require_eval_backends(self) -> None:
        if not self.base_backends or not self.judge_backends:
            raise ConfigError("eval needs at least one base backend and one judge backend")


def default_config() -> HarnessConfig:
    """Offline defaults: local embedder, a single echo base backend."""
    return HarnessConfig(
        base_backends=[BackendConfig(backend_id="echo", kind=BackendKind.ECHO)],
    )


_HARNESS_KEYS = {
    "parallelism", "cache_dir", "prompts_dir", "context_budget_tokens",
    "judge_sees_passages", "judge_sees_reference", "collect_criteria",
    "gains_base", "gains_judge",
}
_EMBEDDER_KEYS = {"provider", "dim", "endpoint", "model_name", "timeout", "retry_budget"}
_RETRIEVAL_KEYS = {"k", "score_threshold", "redundancy_threshold", "min_tokens"}
_CORPUS_KEYS = {"max_tokens", "overlap_tokens", "drop_below_tokens"}
_BACKEND_KEYS = {
    "role", "kind", "model_name", "endpoint", "fixtures_dir", "temperature",
    "max_output_tokens", "timeout", "retry_budget", "backoff_base",
    "max_concurrent", "max_prompt_chars",
}


def _check_keys(section: str, present: set[str], allowed: set[str]) -> None:
    unknown = present - allowed
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {sorted(unknown)}")


def _resolve(base: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path: str | Path) -> HarnessConfig:
    """Parse a harness config file; see the module docs for the format."""
    source = Path(path)
    if not source.exists():
        raise ConfigError(f"config file does not exist: {source}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(source.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    base_dir = source.resolve().parent

    cfg = HarnessConfig()
    cfg.base_backends = []
    try:
        for section in parser.sections():
            items = dict(parser.items(section))
            if section == "harness":
                _check_keys(section, set(items), _HARNESS_KEYS)
                cfg.parallelism = parser.getint(section, "parallelism", fallback=cfg.parallelism)
                if "cache_dir" in items:
                    cfg.cache_dir = _resolve(base_dir, items["cache_dir"])
                if "prompts_dir" in items:
                    cfg.prompts_dir = _resolve(base_dir, items["prompts_dir"])
                cfg.context_budget_tokens = parser.getint(
                    section, "context_budget_tokens", fallback=cfg.context_budget_tokens)
                cfg.judge_sees_passages = parser.getboolean(
                    section, "judge_sees_passages", fallback=cfg.judge_sees_passages)
                cfg.judge_sees_reference = parser.getboolean(
                    section, "judge_sees_reference", fallback=cfg.judge_sees_reference)
                cfg.collect_criteria = parser.getboolean(
                    section, "collect_criteria", fallback=cfg.collect_criteria)
                cfg.gains_base = items.get("gains_base", cfg.gains_base)
                cfg.gains_judge = items.get("gains_judge", cfg.gains_judge)
            elif section == "embedder":
                _check_keys(section, set(items), _EMBEDDER_KEYS)
                cfg.embedder = EmbedderConfig(
                    provider=Provider(items.get("provider", Provider.LOCAL.value)),
                    dim=parser.getint(section, "dim", fallback=EmbedderConfig().dim),
                    endpoint=items.get("endpoint", ""),
                    model_name=items.get("model_name", ""),
                    timeout=parser.getfloat(section, "timeout", fallback=30.0),
                    retry_budget=parser.getint(section, "retry_budget", fallback=2),
                )
            elif section == "retrieval":
                _check_keys(section, set(items), _RETRIEVAL_KEYS)
                defaults = RetrievalConfig()
                cfg.retrieval = RetrievalConfig(
                    k=parser.getint(section, "k", fallback=defaults.k),
                    score_threshold=parser.getfloat(
                        section, "score_threshold", fallback=defaults.score_threshold),
                    redundancy_threshold=parser.getfloat(
                        section, "redundancy_threshold", fallback=defaults.redundancy_threshold),
                    min_tokens=parser.getint(section, "min_tokens", fallback=defaults.min_tokens),
                )
            elif section == "corpus":
                _check_keys(section, set(items), _CORPUS_KEYS)
                cfg.corpus = CorpusConfig(
                    max_tokens=parser.getint(section, "max_tokens",
                                             fallback=DEFAULT_MAX_TOKENS),
                    overlap_tokens=parser.getint(section, "overlap_tokens",
                                                 fallback=DEFAULT_OVERLAP_TOKENS),
                    drop_below_tokens=parser.getint(section, "drop_below_tokens", fallback=1),
                )
            elif section.startswith("backend."):
                backend_id = section[len("backend."):]
                _check_keys(section, set(items), _BACKEND_KEYS)
                role = items.get("role", "")
                if role not in ("base", "judge"):
                    raise ConfigError(f"[{section}] role must be 'base' or 'judge'")
                if "kind" not in items:
                    raise ConfigError(f"[{section}] missing 'kind'")
                fixtures = items.get("fixtures_dir", "")
                backend = BackendConfig(
                    backend_id=backend_id,
                    kind=BackendKind(items["kind"]),
                    model_name=items.get("model_name", ""),
                    endpoint=items.get("endpoint", ""),
                    fixtures_dir=str(_resolve(base_dir, fixtures)) if fixtures else "",
                    temperature=parser.getfloat(section, "temperature", fallback=0.0),
                    max_output_tokens=parser.getint(section, "max_output_tokens", fallback=1024),
                    timeout=parser.getfloat(section, "timeout", fallback=60.0),
                    retry_budget=parser.getint(section, "retry_budget", fallback=2),
                    backoff_base=parser.getfloat(section, "backoff_base", fallback=0.25),
                    max_concurrent=parser.getint(section, "max_concurrent", fallback=4),
                    max_prompt_chars=parser.getint(section, "max_prompt_chars", fallback=0),
                )
                if role == "base":
                    cfg.base_backends.append(backend)
                else:
                    cfg.judge_backends.append(backend)
            else:
                raise ConfigError(f"unknown config section [{section}]")
    except ValueError as exc:
        raise ConfigError(f"invalid value in {source}: {exc}") from exc
    return cfg
