"""Query/passage embedding and cosine similarity.

Two providers share one contract (unit-norm float64 vectors):

* ``deterministic-local`` — a dependency-free hashing embedder used by tests
  and offline runs. Lowercase the text, split on whitespace, FNV-1a-64 each
  token, accumulate ±1 into bucket ``hash % dim`` (sign from bit 63), then
  L2-normalize. Same text always gives bit-identical vectors on every
  platform; similar bags of words land near each other.
* ``remote`` — an HTTP embeddings endpoint. POST
  ``{"model": ..., "input": [text, ...]}``, response
  ``{"data": [{"embedding": [...]}, ...]}`` in input order. Bearer token from
  the ``TIBBE_EMBED_API_KEY`` environment variable when set.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from enum import Enum

import requests

from .errors import ConfigError, DimensionMismatch, EmptyText, RemoteUnavailable

EMBED_API_KEY_VAR = "TIBBE_EMBED_API_KEY"

DEFAULT_LOCAL_DIM = 64
DEFAULT_REMOTE_DIM = 384

_NORM_TOLERANCE = 1e-9

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF
_SIGN_BIT = 1 << 63

_TRANSIENT_STATUSES = {429, 500, 502, 503, 504}


class Provider(str, Enum):
    REMOTE = "remote"
    LOCAL = "deterministic-local"


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise DimensionMismatch(
                f"vector has {len(self.values)} components, declared dim {self.dim}"
            )
        norm_sq = 0.0
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("vector has non-finite components")
            norm_sq += v * v
        if abs(math.sqrt(norm_sq) - 1.0) > _NORM_TOLERANCE:
            raise ValueError(f"vector is not unit-norm (|v| = {math.sqrt(norm_sq)!r})")

    @classmethod
    def from_raw(cls, values: list[float] | tuple[float, ...]) -> "EmbeddingVector":
        """Normalize arbitrary components to a unit vector."""
        norm = math.sqrt(sum(v * v for v in values))
        if norm == 0.0:
            raise EmptyText("cannot normalize the all-zero vector")
        return cls(values=tuple(v / norm for v in values), dim=len(values))


@dataclass(frozen=True)
class EmbedderConfig:
    provider: Provider = Provider.LOCAL
    dim: int = DEFAULT_LOCAL_DIM
    endpoint: str = ""
    model_name: str = ""
    timeout: float = 30.0
    retry_budget: int = 2
    backoff_base: float = 0.25

    def __post_init__(self) -> None:
        if self.dim < 8:
            raise ConfigError(f"embedding dim must be >= 8, got {self.dim}")
        if self.provider is Provider.REMOTE and (not self.endpoint or not self.model_name):
            raise ConfigError("remote embedder requires endpoint and model_name")
        if self.retry_budget < 0:
            raise ConfigError("retry_budget must be non-negative")


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64_MASK
    return h


def _local_embed(text: str, dim: int) -> EmbeddingVector:
    accum = [0.0] * dim
    for token in text.lower().split():
        h = _fnv1a64(token.encode("utf-8"))
        sign = 1.0 if (h & _SIGN_BIT) == 0 else -1.0
        accum[h % dim] += sign
    if all(v == 0.0 for v in accum):
        raise EmptyText(f"text hashed to the zero vector: {text!r}")
    return EmbeddingVector.from_raw(accum)


def _remote_embed(cfg: EmbedderConfig, texts: list[str]) -> list[EmbeddingVector]:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(EMBED_API_KEY_VAR, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {"model": cfg.model_name, "input": texts}

    last_error = ""
    for attempt in range(cfg.retry_budget + 1):
        try:
            resp = requests.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout)
        except requests.RequestException as exc:
            last_error = str(exc)
        else:
            if resp.status_code == 200:
                return _parse_remote_response(cfg, texts, resp)
            if resp.status_code not in _TRANSIENT_STATUSES:
                raise RemoteUnavailable(
                    f"embeddings endpoint returned HTTP {resp.status_code}"
                )
            last_error = f"HTTP {resp.status_code}"
        if attempt < cfg.retry_budget:
            time.sleep(cfg.backoff_base * (2**attempt))
    raise RemoteUnavailable(
        f"embeddings endpoint unavailable after {cfg.retry_budget + 1} attempts: {last_error}"
    )


def _parse_remote_response(
    cfg: EmbedderConfig, texts: list[str], resp: requests.Response
) -> list[EmbeddingVector]:
    try:
        payload = resp.json()
        rows = [item["embedding"] for item in payload["data"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise RemoteUnavailable(f"malformed embeddings response: {exc}") from exc
    if len(rows) != len(texts):
        raise RemoteUnavailable(
            f"embeddings response has {len(rows)} rows for {len(texts)} inputs"
        )
    vectors = []
    for row in rows:
        if len(row) != cfg.dim:
            raise DimensionMismatch(
                f"remote returned {len(row)} components, expected dim {cfg.dim}"
            )
        vectors.append(EmbeddingVector.from_raw([float(v) for v in row]))
    return vectors


def embed_texts(cfg: EmbedderConfig, texts: list[str]) -> list[EmbeddingVector]:
    """Embed a batch of texts, preserving order."""
    for text in texts:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
    if cfg.provider is Provider.LOCAL:
        return [_local_embed(t, cfg.dim) for t in texts]
    return _remote_embed(cfg, texts)


def embed_text(cfg: EmbedderConfig, text: str) -> EmbeddingVector:
    return embed_texts(cfg, [text])[0]


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    total = 0.0
    for x, y in zip(a.values, b.values):
        total += x * y
    return max(-1.0, min(1.0, total))
