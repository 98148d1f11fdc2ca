"""Uniform chat-completion interface over LLM backends.

Three backend kinds share one ``complete()`` contract:

* ``http-chat`` — the de facto chat-completions JSON shape:
  ``{"model", "messages", "temperature", "max_tokens"}`` posted to the
  configured endpoint, answer text read from ``choices[0].message.content``.
  Transient failures (connection errors, 429/5xx) are retried with
  exponential backoff up to ``retry_budget`` extra attempts. API keys come
  from ``TIBBE_LLM_API_KEY_<BACKEND_ID>`` (backend id uppercased, non-alnum
  mapped to ``_``).
* ``scripted`` — replay from a fixture directory: a file named by the
  prompt fingerprint wins; otherwise entries of ``script.jsonl`` are consumed
  in order (cursor mode). A cursor entry is ``{"response": "..."}`` and may
  carry ``"expect_contains": [...]`` — substrings the serialized prompt must
  contain, else the call is a FixtureMiss. Cursor mode assumes sequential
  execution (parallelism 1).
* ``echo`` — returns the last user message verbatim; used to assert prompt
  composition in tests.

Successful completions are written to a content-addressed cache
(``cache_dir/<fingerprint>``: one JSON metadata line, then the raw text), so
reruns are idempotent and live-API runs are resumable.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import requests

from .errors import (
    BackendUnavailable,
    ConfigError,
    EmptyMessages,
    FixtureMiss,
    OverlongPrompt,
)

SCRIPT_FILENAME = "script.jsonl"

_TRANSIENT_STATUSES = {429, 500, 502, 503, 504}


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class BackendKind(str, Enum):
    HTTP_CHAT = "http-chat"
    SCRIPTED = "scripted"
    ECHO = "echo"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if not self.content:
            raise EmptyMessages("message content must be non-empty")


def system(content: str) -> ChatMessage:
    return ChatMessage(Role.SYSTEM, content)


def user(content: str) -> ChatMessage:
    return ChatMessage(Role.USER, content)


def assistant(content: str) -> ChatMessage:
    return ChatMessage(Role.ASSISTANT, content)


@dataclass(frozen=True)
class BackendConfig:
    backend_id: str
    kind: BackendKind
    model_name: str = ""
    endpoint: str = ""
    fixtures_dir: str = ""
    temperature: float = 0.0
    max_output_tokens: int = 1024
    timeout: float = 60.0
    retry_budget: int = 2
    backoff_base: float = 0.25
    max_concurrent: int = 4
    max_prompt_chars: int = 0  # 0 = unlimited

    def __post_init__(self) -> None:
        if not self.backend_id:
            raise ConfigError("backend_id must be non-empty")
        if self.kind is BackendKind.HTTP_CHAT and (not self.endpoint or not self.model_name):
            raise ConfigError(f"backend {self.backend_id}: http-chat requires endpoint and model_name")
        if self.kind is BackendKind.SCRIPTED and not self.fixtures_dir:
            raise ConfigError(f"backend {self.backend_id}: scripted requires fixtures_dir")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.retry_budget < 0 or self.max_concurrent < 1 or self.max_output_tokens < 1:
            raise ConfigError(f"backend {self.backend_id}: invalid limits")

    def api_key_var(self) -> str:
        return "TIBBE_LLM_API_KEY_" + re.sub(r"[^A-Za-z0-9]", "_", self.backend_id).upper()


@dataclass(frozen=True)
class CompletionResult:
    text: str
    backend_id: str
    prompt_fingerprint: str
    cached: bool
    latency: float


def _canonical_prompt(cfg: BackendConfig, messages: list[ChatMessage]) -> str:
    return json.dumps(
        {
            "backend_id": cfg.backend_id,
            "model_name": cfg.model_name,
            "temperature": cfg.temperature,
            "messages": [[m.role.value, m.content] for m in messages],
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )


def fingerprint(cfg: BackendConfig, messages: list[ChatMessage]) -> str:
    """256-bit prompt fingerprint, stable across processes and platforms."""
    if not messages:
        raise EmptyMessages("cannot fingerprint an empty message list")
    return hashlib.sha256(_canonical_prompt(cfg, messages).encode("ascii")).hexdigest()


def _validate_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise EmptyMessages("messages must be non-empty")
    for i, msg in enumerate(messages):
        if msg.role is Role.SYSTEM and i != 0:
            raise ValueError("system message only allowed in first position")
        if i > 0 and msg.role is Role.ASSISTANT and messages[i - 1].role is Role.ASSISTANT:
            raise ValueError("two consecutive assistant messages")


class LlmGateway:
    """Executes completions against configured backends, with caching.

    Safe for concurrent ``complete`` calls; per-backend semaphores cap
    in-flight HTTP requests, the cache writes via temp-file + atomic rename,
    and scripted cursors advance under a lock.
    """

    def __init__(self, cache_dir: str | Path | None = None):
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.calls: Counter = Counter()
        self._lock = threading.Lock()
        self._cursors: dict[str, list[dict]] = {}
        self._semaphores: dict[str, threading.Semaphore] = {}

    # -- cache -------------------------------------------------------------

    def _cache_path(self, fp: str) -> Path | None:
        return self.cache_dir / fp if self.cache_dir else None

    def _cache_read(self, fp: str) -> str | None:
        path = self._cache_path(fp)
        if path is None or not path.exists():
            return None
        raw = path.read_text(encoding="utf-8")
        _, _, text = raw.partition("\n")
        return text

    def _cache_write(self, fp: str, cfg: BackendConfig, text: str) -> None:
        path = self._cache_path(fp)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        header = json.dumps(
            {"backend_id": cfg.backend_id, "model_name": cfg.model_name,
             "fingerprint": fp, "created_at": time.time()},
            sort_keys=True,
        )
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".cache-")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(header + "\n" + text)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    # -- backends ----------------------------------------------------------

    def _semaphore(self, cfg: BackendConfig) -> threading.Semaphore:
        with self._lock:
            if cfg.backend_id not in self._semaphores:
                self._semaphores[cfg.backend_id] = threading.Semaphore(cfg.max_concurrent)
            return self._semaphores[cfg.backend_id]

    def _http_complete(self, cfg: BackendConfig, messages: list[ChatMessage]) -> str:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(cfg.api_key_var(), "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": cfg.model_name,
            "messages": [{"role": m.role.value, "content": m.content} for m in messages],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        }
        last_error = ""
        for attempt in range(cfg.retry_budget + 1):
            self.calls[f"http_attempts:{cfg.backend_id}"] += 1
            try:
                with self._semaphore(cfg):
                    resp = requests.post(cfg.endpoint, json=body, headers=headers,
                                         timeout=cfg.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
            else:
                if resp.status_code == 200:
                    try:
                        text = resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise BackendUnavailable(
                            f"{cfg.backend_id}: malformed chat response: {exc}"
                        ) from exc
                    if not text:
                        raise BackendUnavailable(f"{cfg.backend_id}: empty completion")
                    return text
                if resp.status_code not in _TRANSIENT_STATUSES:
                    raise BackendUnavailable(
                        f"{cfg.backend_id}: HTTP {resp.status_code}"
                    )
                last_error = f"HTTP {resp.status_code}"
            if attempt < cfg.retry_budget:
                time.sleep(cfg.backoff_base * (2**attempt))
        raise BackendUnavailable(
            f"{cfg.backend_id}: unavailable after {cfg.retry_budget + 1} attempts: {last_error}"
        )

    def _script_entries(self, cfg: BackendConfig) -> list[dict]:
        with self._lock:
            if cfg.backend_id not in self._cursors:
                script = Path(cfg.fixtures_dir) / SCRIPT_FILENAME
                entries: list[dict] = []
                if script.exists():
                    for line in script.read_text(encoding="utf-8").splitlines():
                        if line.strip():
                            entries.append(json.loads(line))
                self._cursors[cfg.backend_id] = entries
            return self._cursors[cfg.backend_id]

    def _scripted_complete(self, cfg: BackendConfig, messages: list[ChatMessage], fp: str) -> str:
        exact = Path(cfg.fixtures_dir) / fp
        if exact.exists():
            return exact.read_text(encoding="utf-8")
        entries = self._script_entries(cfg)
        with self._lock:
            if not entries:
                raise FixtureMiss(
                    f"{cfg.backend_id}: no fixture file {fp} and the script is exhausted"
                )
            entry = entries.pop(0)
        expect = entry.get("expect_contains", [])
        if expect:
            prompt_text = "\n".join(m.content for m in messages)
            missing = [s for s in expect if s not in prompt_text]
            if missing:
                raise FixtureMiss(
                    f"{cfg.backend_id}: prompt does not contain expected text {missing!r}"
                )
        try:
            return entry["response"]
        except KeyError:
            raise FixtureMiss(f"{cfg.backend_id}: script entry without a 'response' field") from None

    @staticmethod
    def _echo_complete(messages: list[ChatMessage]) -> str:
        for msg in reversed(messages):
            if msg.role is Role.USER:
                return msg.content
        raise EmptyMessages("echo backend needs at least one user message")

    # -- public ------------------------------------------------------------

    def complete(self, cfg: BackendConfig, messages: list[ChatMessage]) -> CompletionResult:
        """Run one chat completion; see the module docs for backend semantics."""
        _validate_messages(messages)
        serialized = _canonical_prompt(cfg, messages)
        if cfg.max_prompt_chars and len(serialized) > cfg.max_prompt_chars:
            raise OverlongPrompt(
                f"{cfg.backend_id}: serialized prompt is {len(serialized)} chars, "
                f"limit {cfg.max_prompt_chars}"
            )
        fp = hashlib.sha256(serialized.encode("ascii")).hexdigest()
        self.calls[cfg.backend_id] += 1
        started = time.monotonic()

        cached = self._cache_read(fp)
        if cached is not None:
            return CompletionResult(text=cached, backend_id=cfg.backend_id,
                                    prompt_fingerprint=fp, cached=True,
                                    latency=time.monotonic() - started)

        if cfg.kind is BackendKind.HTTP_CHAT:
            text = self._http_complete(cfg, messages)
        elif cfg.kind is BackendKind.SCRIPTED:
            text = self._scripted_complete(cfg, messages, fp)
        else:
            text = self._echo_complete(messages)

        self._cache_write(fp, cfg, text)
        return CompletionResult(text=text, backend_id=cfg.backend_id,
                                prompt_fingerprint=fp, cached=False,
                                latency=time.monotonic() - started)
