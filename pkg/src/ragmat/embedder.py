"""Embedding client: remote OpenAI-compatible endpoint, deterministic offline
mock, and a content-addressed on-disk cache.

Cache keys hash (model_id, whitespace-normalized text), so reformatting a
chunk does not re-embed it. The mock embedding is a hash-seeded bag-of-words
vector: texts sharing vocabulary land closer together, distinct texts get
distinct vectors, and no RNG state is involved, so results are stable across
platforms and processes.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .endpoints import EndpointConfig, post_json
from .errors import DimMismatch, EndpointError

_TOKEN_RE = re.compile(r"[a-z0-9']+")
_FULLTEXT_WEIGHT = 0.25
_EMBED_BATCH = 256


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray = field(repr=False)
    model_id: str

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding values must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        return (isinstance(other, EmbeddingVector)
                and self.model_id == other.model_id
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.model_id, self.values.tobytes()))


def normalize_text(text: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return " ".join(text.split())


def content_hash(model_id: str, text: str) -> str:
    key = f"{model_id}\x00{normalize_text(text)}".encode("utf-8")
    return hashlib.sha256(key).hexdigest()


class EmbeddingCache:
    """Directory of JSON files, one per (model, normalized text) hash."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def get(self, digest: str) -> EmbeddingVector | None:
        path = self._path(digest)
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return EmbeddingVector(values=np.array(data["values"], dtype=np.float64),
                               model_id=data["model_id"])

    def put(self, digest: str, vector: EmbeddingVector) -> None:
        # Write-then-rename keeps each entry atomic under concurrent writers.
        tmp = self._path(digest).with_suffix(f".tmp{os.getpid()}")
        tmp.write_text(json.dumps({
            "model_id": vector.model_id,
            "dim": vector.dim,
            "values": vector.values.tolist(),
        }), encoding="utf-8")
        os.replace(tmp, self._path(digest))


def _hash_floats(key: bytes, dim: int) -> np.ndarray:
    """dim floats in [-1, 1) derived from SHA-256 of key in counter mode."""
    out = np.empty(dim, dtype=np.float64)
    i = 0
    counter = 0
    while i < dim:
        digest = hashlib.sha256(key + counter.to_bytes(4, "big")).digest()
        for off in range(0, 32, 8):
            if i >= dim:
                break
            word = int.from_bytes(digest[off:off + 8], "big")
            out[i] = word / 2.0 ** 63 - 1.0
            i += 1
        counter += 1
    return out


@lru_cache(maxsize=65536)
def _token_vector(token: str, dim: int) -> np.ndarray:
    return _hash_floats(b"tok\x00" + token.encode("utf-8"), dim)


def mock_embed(text: str, dim: int = 64, model_id: str = "mock-embedding") -> EmbeddingVector:
    """Deterministic unit-norm embedding of text.

    Sum of per-token hash vectors plus a down-weighted whole-text hash
    component; the latter keeps permutations of the same words distinct.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    acc = _FULLTEXT_WEIGHT * _hash_floats(b"txt\x00" + text.encode("utf-8"), dim)
    for token in _TOKEN_RE.findall(text.lower()):
        acc = acc + _token_vector(token, dim)
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        raise ValueError("degenerate mock embedding (zero vector)")
    return EmbeddingVector(values=acc / norm, model_id=model_id)


def _mock_dim(endpoint: EndpointConfig) -> int:
    try:
        return int(endpoint.mock_target)
    except ValueError:
        raise ValueError(
            f"mock embedding endpoint must be mock://<dim>, got {endpoint.base_url!r}") from None


def _remote_embed(texts: list[str], model_id: str, endpoint: EndpointConfig) -> list[EmbeddingVector]:
    vectors: list[EmbeddingVector] = []
    for base in range(0, len(texts), _EMBED_BATCH):
        batch = texts[base:base + _EMBED_BATCH]
        body = post_json(endpoint, "/v1/embeddings", {"model": model_id, "input": batch})
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(batch):
            raise EndpointError(None, f"embedding response has {len(data or [])} rows "
                                      f"for {len(batch)} inputs")
        for item in sorted(data, key=lambda d: d.get("index", 0)):
            vectors.append(EmbeddingVector(values=np.array(item["embedding"], dtype=np.float64),
                                           model_id=model_id))
    return vectors


def embed_texts(
    texts: list[str],
    model_id: str,
    endpoint: EndpointConfig,
    cache: EmbeddingCache | None = None,
) -> list[EmbeddingVector]:
    """Embed texts in order, serving repeats from the cache.

    All returned vectors share one dimension; a remote endpoint answering
    with inconsistent dims raises DimMismatch.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    for i, text in enumerate(texts):
        if not text or not text.strip():
            raise ValueError(f"texts[{i}] is empty")

    digests = [content_hash(model_id, t) for t in texts]
    results: dict[str, EmbeddingVector] = {}
    if cache is not None:
        for digest in digests:
            if digest not in results:
                hit = cache.get(digest)
                if hit is not None:
                    results[digest] = hit

    missing: list[tuple[str, str]] = []
    seen: set[str] = set()
    for text, digest in zip(texts, digests):
        if digest not in results and digest not in seen:
            missing.append((text, digest))
            seen.add(digest)

    if missing:
        if endpoint.is_mock:
            dim = _mock_dim(endpoint)
            fresh = [mock_embed(text, dim, model_id=model_id) for text, _ in missing]
        else:
            fresh = _remote_embed([text for text, _ in missing], model_id, endpoint)
        for (_, digest), vector in zip(missing, fresh):
            results[digest] = vector
            if cache is not None:
                cache.put(digest, vector)

    out = [results[digest] for digest in digests]
    dims = {v.dim for v in out}
    if len(dims) > 1:
        raise DimMismatch(f"inconsistent embedding dims in one batch: {sorted(dims)}")
    return out
