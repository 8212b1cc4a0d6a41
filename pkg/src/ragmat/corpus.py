"""Knowledge-base ingestion: sectioned XML files in, uniform character chunks out.

Corpus layout is one <document> per file, each holding one or more <section>
elements of plain text. Chunking slices section bodies on raw character
offsets so that the ordered chunks of a section concatenate back to the body
exactly.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DuplicateSectionId, MalformedXml

SOURCE_KINDS = ("medlineplus", "guideline", "journal_article")

DEFAULT_CHUNK_SIZE = 1000


@dataclass(frozen=True)
class DocumentSection:
    doc_id: str
    source_kind: str
    title: str
    url: str | None
    section_id: str
    heading: str
    body: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.doc_id, self.section_id)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    section_id: str
    ordinal: int
    text: str
    start: int
    end: int

    @property
    def char_span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def parent(self) -> tuple[str, str]:
        return (self.doc_id, self.section_id)


@dataclass(frozen=True)
class CorpusStats:
    file_count: int
    section_count: int
    chunk_count: int


def parse_corpus(directory_path: str | Path) -> list[DocumentSection]:
    """Parse every *.xml file under directory_path into DocumentSections.

    Files are visited in lexicographic path order and sections kept in
    document order, so two parses of the same directory are identical.
    Schema violations raise MalformedXml rather than being skipped.
    """
    directory = Path(directory_path)
    sections: list[DocumentSection] = []
    seen: set[tuple[str, str]] = set()
    for path in sorted(directory.glob("*.xml"), key=str):
        for section in _parse_file(path):
            if section.key in seen:
                raise DuplicateSectionId(section.doc_id, section.section_id)
            seen.add(section.key)
            sections.append(section)
    return sections


def _parse_file(path: Path) -> list[DocumentSection]:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise MalformedXml(str(path), f"not well-formed: {exc}") from exc
    if root.tag != "document":
        raise MalformedXml(str(path), f"root element is <{root.tag}>, expected <document>")
    doc_id = root.get("doc_id")
    source_kind = root.get("source_kind")
    title = root.get("title")
    if not doc_id or not source_kind or title is None:
        raise MalformedXml(str(path), "document requires doc_id, source_kind and title attributes")
    if source_kind not in SOURCE_KINDS:
        raise MalformedXml(str(path), f"unknown source_kind {source_kind!r}")
    url = root.get("url")

    out = []
    elems = list(root)
    if not elems:
        raise MalformedXml(str(path), "document has no <section> elements")
    local_ids: set[str] = set()
    for elem in elems:
        if elem.tag != "section":
            raise MalformedXml(str(path), f"unexpected element <{elem.tag}> inside <document>")
        section_id = elem.get("section_id")
        heading = elem.get("heading")
        if not section_id or heading is None:
            raise MalformedXml(str(path), "section requires section_id and heading attributes")
        if section_id in local_ids:
            raise DuplicateSectionId(doc_id, section_id)
        local_ids.add(section_id)
        body = "".join(elem.itertext()).strip()
        if not body:
            raise MalformedXml(str(path), f"section {section_id!r} has an empty body")
        out.append(DocumentSection(
            doc_id=doc_id, source_kind=source_kind, title=title, url=url,
            section_id=section_id, heading=heading, body=body,
        ))
    return out


def chunk_section(section: DocumentSection, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[Chunk]:
    """Slice a section body into contiguous chunks of chunk_size characters.

    Offsets are Unicode scalar positions. Every chunk except possibly the
    last has exactly chunk_size characters; concatenating the results
    reproduces the body byte-for-byte.
    """
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    body = section.body
    chunks = []
    for ordinal, start in enumerate(range(0, len(body), chunk_size)):
        end = min(start + chunk_size, len(body))
        chunks.append(Chunk(
            chunk_id=f"{section.doc_id}#{section.section_id}#{ordinal}",
            doc_id=section.doc_id,
            section_id=section.section_id,
            ordinal=ordinal,
            text=body[start:end],
            start=start,
            end=end,
        ))
    return chunks


def chunk_corpus(sections: Iterable[DocumentSection], chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[Chunk]:
    out: list[Chunk] = []
    for section in sections:
        out.extend(chunk_section(section, chunk_size))
    return out


def corpus_stats(sections: list[DocumentSection], chunks: list[Chunk]) -> CorpusStats:
    # One <document> per file, so distinct doc_ids count source files.
    return CorpusStats(
        file_count=len({s.doc_id for s in sections}),
        section_count=len(sections),
        chunk_count=len(chunks),
    )


# --- chunk JSONL records (the `ingest` artifact consumed by `index`) --------

def chunk_record(section: DocumentSection, chunk: Chunk) -> dict:
    """One self-contained JSONL record: chunk fields plus parent metadata."""
    return {
        "chunk_id": chunk.chunk_id,
        "doc_id": chunk.doc_id,
        "section_id": chunk.section_id,
        "ordinal": chunk.ordinal,
        "text": chunk.text,
        "start": chunk.start,
        "end": chunk.end,
        "source_kind": section.source_kind,
        "title": section.title,
        "url": section.url,
        "heading": section.heading,
        "section_body": section.body,
    }


def write_chunks_jsonl(path: str | Path, sections: list[DocumentSection], chunks: list[Chunk]) -> int:
    by_key = {s.key: s for s in sections}
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk_record(by_key[chunk.parent], chunk), ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_chunks_jsonl(path: str | Path) -> tuple[list[Chunk], dict[tuple[str, str], DocumentSection]]:
    """Inverse of write_chunks_jsonl: chunks plus the parent-section map."""
    chunks: list[Chunk] = []
    sections: dict[tuple[str, str], DocumentSection] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            chunks.append(Chunk(
                chunk_id=rec["chunk_id"], doc_id=rec["doc_id"], section_id=rec["section_id"],
                ordinal=rec["ordinal"], text=rec["text"], start=rec["start"], end=rec["end"],
            ))
            key = (rec["doc_id"], rec["section_id"])
            if key not in sections:
                sections[key] = DocumentSection(
                    doc_id=rec["doc_id"], source_kind=rec["source_kind"], title=rec["title"],
                    url=rec["url"], section_id=rec["section_id"], heading=rec["heading"],
                    body=rec["section_body"],
                )
    return chunks, sections
