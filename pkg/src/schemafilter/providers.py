"""Embedding providers: deterministic feature-hash embedder and remote client.

A provider turns (query, column-document) pairs into fixed-dimension vectors
used as the graph's initial node features. The hash provider is a pure,
dependency-free stand-in for the served LLM encoder: it mixes salted hashed
token features of the query, of each document field, and of their shared
tokens, so query/column token overlap shows up in inner products at desk
scale. The remote provider speaks the wire protocol documented in the README.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import (
    DimensionMismatchError,
    MalformedResponseError,
    ModelVersionChangedError,
    TransportError,
)
from .values import tokenize_text

MIN_HASH_DIM = 8
_SHARED_SALT = "shared"
_OVERLAP_FEATURE = "__overlap__"
_OVERLAP_GAIN = 4.0
_SHARED_TOKEN_WEIGHT = 2.0

_hash_cache: dict[tuple[str, str], tuple[int, float]] = {}
_HASH_CACHE_CAP = 1 << 20


def _bucket_sign(salt: str, token: str) -> tuple[int, float]:
    key = (salt, token)
    hit = _hash_cache.get(key)
    if hit is not None:
        return hit
    digest = hashlib.blake2b(f"{salt}\x1f{token}".encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    out = (value >> 1, 1.0 if value & 1 else -1.0)
    if len(_hash_cache) < _HASH_CACHE_CAP:
        _hash_cache[key] = out
    return out


def _ngrams(text: str) -> list[str]:
    tokens = tokenize_text(text)
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return grams


def _document_fields(document: str) -> list[tuple[str, str]]:
    fields = []
    for line in document.split("\n"):
        label, sep, value = line.partition(": ")
        if sep and label:
            fields.append((label.strip().lower().replace(" ", "_"), value))
        else:
            fields.append(("document", line))
    return fields


def hash_embed(query: str, document: str, dim: int) -> np.ndarray:
    """Feature-hash a (query, document) pair into a unit vector.

    Query n-grams and each document field's n-grams land in field-salted
    buckets; tokens shared between query and document additionally land in a
    fixed shared-salt region (plus one overlap-ratio feature), which is what
    makes inner products rise with query/column token overlap. A zero
    accumulation (no tokens at all) maps to the first basis vector.
    """
    if dim < MIN_HASH_DIM:
        raise ValueError(f"hash embedding dim must be >= {MIN_HASH_DIM}, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)

    q_grams = _ngrams(query)
    for gram in q_grams:
        bucket, sign = _bucket_sign("query", gram)
        vec[bucket % dim] += sign

    doc_tokens: set[str] = set()
    for label, text in _document_fields(document):
        grams = _ngrams(text)
        doc_tokens.update(grams)
        for gram in grams:
            bucket, sign = _bucket_sign(label, gram)
            vec[bucket % dim] += sign

    q_set = set(q_grams)
    shared = q_set & doc_tokens
    for gram in sorted(shared):
        bucket, sign = _bucket_sign(_SHARED_SALT, gram)
        vec[bucket % dim] += sign * _SHARED_TOKEN_WEIGHT
    if q_set and doc_tokens:
        ratio = len(shared) / math.sqrt(len(q_set) * len(doc_tokens))
        if ratio > 0.0:
            bucket, sign = _bucket_sign(_SHARED_SALT, _OVERLAP_FEATURE)
            vec[bucket % dim] += sign * _OVERLAP_GAIN * ratio

    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


class EmbeddingProvider(Protocol):
    dim: int
    provider_id: str
    max_batch: int | None

    def embed_batch(self, items: Sequence[tuple[str, str]]) -> np.ndarray: ...


@dataclass
class HashProvider:
    """Pure, unbounded-concurrency provider backed by ``hash_embed``."""

    dim: int = 256
    max_batch: int | None = None

    @property
    def provider_id(self) -> str:
        return f"hash:{self.dim}:v1"

    def embed_batch(self, items: Sequence[tuple[str, str]]) -> np.ndarray:
        if not items:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([hash_embed(query, document, self.dim) for query, document in items])


@dataclass
class RemoteProvider:
    """HTTP client for an externally served scorer/encoder.

    Wire protocol: POST {model_hint, items:[{query, document}]} ->
    {model_version, results:[{embedding:[...]} | {logit: ...}]}. Responses are
    order-preserving; the model version is pinned on first contact and a
    mid-run change aborts (embeddings from different versions do not mix).
    """

    endpoint: str
    dim: int
    max_batch: int | None = 64
    timeout: float = 10.0
    model_hint: str = ""
    retries: int = 2
    auth_token_env: str = "SCHEMAFILTER_API_TOKEN"
    session: requests.Session | None = None
    _model_version: str | None = field(default=None, repr=False)

    @property
    def provider_id(self) -> str:
        return f"remote:{self.endpoint}:{self.model_hint or 'default'}"

    @property
    def model_version(self) -> str | None:
        return self._model_version

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, items: Sequence[tuple[str, str]]) -> list[dict]:
        payload = {
            "model_hint": self.model_hint,
            "items": [{"query": q, "document": d} for q, d in items],
        }
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                http = self.session or requests
                response = http.post(
                    self.endpoint,
                    data=json.dumps(payload),
                    headers=self._headers(),
                    timeout=self.timeout,
                )
                break
            except requests.RequestException as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(0.05 * (attempt + 1))
        else:
            raise TransportError(f"cannot reach {self.endpoint}: {last_exc}") from last_exc
        if response.status_code != 200:
            raise TransportError(f"{self.endpoint} answered HTTP {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise MalformedResponseError(f"{self.endpoint} returned non-JSON body") from exc
        if not isinstance(body, dict) or "results" not in body:
            raise MalformedResponseError("response lacks a 'results' field")
        version = str(body.get("model_version", ""))
        if self._model_version is None:
            self._model_version = version
        elif version != self._model_version:
            raise ModelVersionChangedError(
                f"model version changed mid-run: {self._model_version!r} -> {version!r}"
            )
        results = body["results"]
        if not isinstance(results, list) or len(results) != len(items):
            raise MalformedResponseError(
                f"expected {len(items)} results, got {len(results) if isinstance(results, list) else type(results)}"
            )
        return results

    def _chunks(self, items: Sequence[tuple[str, str]]):
        size = self.max_batch or len(items)
        for start in range(0, len(items), size):
            yield items[start : start + size]

    def embed_batch(self, items: Sequence[tuple[str, str]]) -> np.ndarray:
        if not items:
            return np.zeros((0, self.dim), dtype=np.float64)
        rows: list[np.ndarray] = []
        for chunk in self._chunks(items):
            for entry in self._post(chunk):
                if "embedding" not in entry:
                    raise MalformedResponseError("result entry lacks 'embedding'")
                vec = np.asarray(entry["embedding"], dtype=np.float64)
                if vec.shape != (self.dim,):
                    raise DimensionMismatchError(
                        f"provider returned dim {vec.shape}, declared {self.dim}"
                    )
                rows.append(vec)
        return np.stack(rows)

    def score_batch(self, items: Sequence[tuple[str, str]]) -> np.ndarray:
        """Unnormalized relevance logits for (query, document) pairs."""
        if not items:
            return np.zeros(0, dtype=np.float64)
        logits: list[float] = []
        for chunk in self._chunks(items):
            for entry in self._post(chunk):
                if "logit" not in entry:
                    raise MalformedResponseError("result entry lacks 'logit'")
                logits.append(float(entry["logit"]))
        return np.asarray(logits, dtype=np.float64)


def embed(provider: EmbeddingProvider, query: str, document: str) -> np.ndarray:
    """Single-item convenience wrapper over the batch API."""
    return provider.embed_batch([(query, document)])[0]


class EmbeddingCache:
    """On-disk embedding cache keyed by content hash; plumbing, not fidelity."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, provider_id: str, query: str, document: str) -> Path:
        digest = hashlib.sha256(
            "\x1f".join((provider_id, query, document)).encode("utf-8")
        ).hexdigest()
        return self.directory / digest[:2] / f"{digest}.npy"

    def get(self, provider_id: str, query: str, document: str) -> np.ndarray | None:
        path = self._path(provider_id, query, document)
        if not path.exists():
            return None
        return np.load(path)

    def put(self, provider_id: str, query: str, document: str, vector: np.ndarray) -> None:
        path = self._path(provider_id, query, document)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npy")
        np.save(tmp, vector)
        os.replace(tmp, path)


@dataclass
class CachingProvider:
    """Wraps a provider with an EmbeddingCache; misses fall through in order."""

    inner: EmbeddingProvider
    cache: EmbeddingCache

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def provider_id(self) -> str:
        return self.inner.provider_id

    @property
    def max_batch(self) -> int | None:
        return self.inner.max_batch

    def embed_batch(self, items: Sequence[tuple[str, str]]) -> np.ndarray:
        if not items:
            return np.zeros((0, self.dim), dtype=np.float64)
        out: list[np.ndarray | None] = []
        misses: list[tuple[int, tuple[str, str]]] = []
        for i, (query, document) in enumerate(items):
            cached = self.cache.get(self.provider_id, query, document)
            out.append(cached)
            if cached is None:
                misses.append((i, (query, document)))
        if misses:
            fetched = self.inner.embed_batch([pair for _, pair in misses])
            for (i, (query, document)), vec in zip(misses, fetched):
                self.cache.put(self.provider_id, query, document, vec)
                out[i] = vec
        return np.stack([v for v in out])  # type: ignore[arg-type]
