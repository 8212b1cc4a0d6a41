"""Exact nearest-neighbor store over embedded chunks.

Chunks are embedded and scored by cosine distance (0 = identical direction),
then hits are grouped back to their parent sections: a section's distance is
the minimum over its chunks, and search returns whole sections ordered by
that distance. With a few thousand vectors an exhaustive scan is both faster
to build and strictly checkable against a brute-force oracle, so there is no
approximate index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Chunk, DocumentSection
from .embedder import EmbeddingVector
from .errors import DimMismatch, DuplicateChunkId, ZeroNorm

DEFAULT_K = 7
DEFAULT_MAX_DISTANCE = 0.40


@dataclass(frozen=True)
class EmbeddedChunk:
    chunk: Chunk
    vector: EmbeddingVector


@dataclass(frozen=True)
class SectionHit:
    section: DocumentSection
    distance: float
    best_chunk_id: str


def cosine_distance(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """1 - cosine similarity, clamped into [0, 2]."""
    if a.dim != b.dim:
        raise DimMismatch(f"dims differ: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine distance undefined for zero-norm vector")
    d = 1.0 - float(np.dot(a.values, b.values)) / (na * nb)
    return min(2.0, max(0.0, d))


class Index:
    """Immutable after build; searches need no coordination."""

    def __init__(
        self,
        dim: int,
        model_id: str,
        matrix: np.ndarray,
        chunks: list[Chunk],
        sections: dict[tuple[str, str], DocumentSection],
    ):
        self.dim = dim
        self.model_id = model_id
        self._matrix = matrix        # raw vectors, one row per chunk
        self._chunks = chunks
        self._sections = sections
        if matrix.shape[0]:
            norms = np.linalg.norm(matrix, axis=1)
            if np.any(norms == 0.0):
                raise ZeroNorm("index contains a zero-norm vector")
            self._unit = matrix / norms[:, None]
        else:
            self._unit = matrix

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def sections(self) -> dict[tuple[str, str], DocumentSection]:
        return self._sections

    def distances(self, query_vec: EmbeddingVector) -> np.ndarray:
        if query_vec.dim != self.dim:
            raise DimMismatch(f"query dim {query_vec.dim} != index dim {self.dim}")
        if query_vec.model_id != self.model_id:
            raise DimMismatch(
                f"query embedded with {query_vec.model_id!r}, index with {self.model_id!r}")
        qnorm = float(np.linalg.norm(query_vec.values))
        if qnorm == 0.0:
            raise ZeroNorm("query vector has zero norm")
        d = 1.0 - self._unit @ (query_vec.values / qnorm)
        return np.clip(d, 0.0, 2.0)

    def save(self, store_path: str | Path) -> None:
        store = Path(store_path)
        store.mkdir(parents=True, exist_ok=True)
        (store / "meta.json").write_text(json.dumps({
            "dim": self.dim, "model_id": self.model_id, "count": len(self._chunks),
        }), encoding="utf-8")
        np.save(store / "vectors.npy", self._matrix)
        with open(store / "chunks.jsonl", "w", encoding="utf-8") as fh:
            for c in self._chunks:
                fh.write(json.dumps({
                    "chunk_id": c.chunk_id, "doc_id": c.doc_id, "section_id": c.section_id,
                    "ordinal": c.ordinal, "text": c.text, "start": c.start, "end": c.end,
                }, ensure_ascii=False) + "\n")
        with open(store / "sections.jsonl", "w", encoding="utf-8") as fh:
            for s in self._sections.values():
                fh.write(json.dumps({
                    "doc_id": s.doc_id, "source_kind": s.source_kind, "title": s.title,
                    "url": s.url, "section_id": s.section_id, "heading": s.heading,
                    "body": s.body,
                }, ensure_ascii=False) + "\n")


def build_index(
    items: list[EmbeddedChunk],
    sections: dict[tuple[str, str], DocumentSection],
    store_path: str | Path | None = None,
) -> Index:
    """Assemble (and optionally persist) an index from embedded chunks.

    Reloading a persisted index yields bit-identical search results because
    raw float64 vectors are stored and normalization is recomputed the same
    way on load.
    """
    seen: set[str] = set()
    dims = set()
    models = set()
    for item in items:
        if item.chunk.chunk_id in seen:
            raise DuplicateChunkId(item.chunk.chunk_id)
        seen.add(item.chunk.chunk_id)
        dims.add(item.vector.dim)
        models.add(item.vector.model_id)
        if item.chunk.parent not in sections:
            raise KeyError(f"no parent section for chunk {item.chunk.chunk_id!r}")
    if len(dims) > 1:
        raise DimMismatch(f"items carry multiple dims: {sorted(dims)}")
    if len(models) > 1:
        raise DimMismatch(f"items carry multiple embedding models: {sorted(models)}")

    if items:
        dim = items[0].vector.dim
        model_id = items[0].vector.model_id
        matrix = np.stack([item.vector.values for item in items])
    else:
        dim, model_id, matrix = 0, "", np.empty((0, 0), dtype=np.float64)
    index = Index(dim, model_id, matrix, [item.chunk for item in items], dict(sections))
    if store_path is not None:
        index.save(store_path)
    return index


def load_index(store_path: str | Path) -> Index:
    store = Path(store_path)
    meta = json.loads((store / "meta.json").read_text(encoding="utf-8"))
    matrix = np.load(store / "vectors.npy")
    chunks = []
    with open(store / "chunks.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                chunks.append(Chunk(**json.loads(line)))
    sections: dict[tuple[str, str], DocumentSection] = {}
    with open(store / "sections.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                s = DocumentSection(**json.loads(line))
                sections[s.key] = s
    return Index(meta["dim"], meta["model_id"], matrix, chunks, sections)


def search(
    index: Index,
    query_vec: EmbeddingVector,
    k: int = DEFAULT_K,
    max_distance: float = DEFAULT_MAX_DISTANCE,
) -> list[SectionHit]:
    """Top-k parent sections within the distance threshold.

    Every chunk is scored; each section takes its best chunk's distance.
    Sections qualify when distance <= max_distance, sort ascending by
    distance with (doc_id, section_id) breaking ties, and at most k are
    returned, each carrying the full parent body.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(index) == 0:
        return []
    dists = index.distances(query_vec)

    best: dict[tuple[str, str], tuple[float, str]] = {}
    for chunk, dist in zip(index._chunks, dists):
        d = float(dist)
        cur = best.get(chunk.parent)
        if cur is None or (d, chunk.chunk_id) < cur:
            best[chunk.parent] = (d, chunk.chunk_id)

    qualifying = [
        (d, key[0], key[1], chunk_id)
        for key, (d, chunk_id) in best.items()
        if d <= max_distance
    ]
    qualifying.sort(key=lambda row: (row[0], row[1], row[2]))
    return [
        SectionHit(section=index.sections[(doc_id, section_id)], distance=d,
                   best_chunk_id=chunk_id)
        for d, doc_id, section_id, chunk_id in qualifying[:k]
    ]
