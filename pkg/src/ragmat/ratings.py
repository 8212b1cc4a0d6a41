"""Blinded Likert review: sessions, score capture, CSV import/export.

A review session is a seeded shuffle of run outputs where every item is
addressed by an opaque token; which model/configuration produced an item is
resolved only server-side, so nothing a rater sees carries that identity.
Scores overwrite idempotently with an audit trail (raters correct mistakes).
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    DuplicateKey,
    MalformedRow,
    ScoreOutOfRange,
    UnknownConfigLabel,
    UnknownItemToken,
)
from .pipeline import RunArtifacts

CSV_HEADER = ["rater_id", "profile_id", "config_label",
              "redundancy", "accuracy", "completeness"]


@dataclass(frozen=True)
class LikertRecord:
    rater_id: str
    profile_id: str
    config_label: str
    redundancy: int
    accuracy: int
    completeness: int

    def __post_init__(self):
        for name in ("redundancy", "accuracy", "completeness"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
                raise ScoreOutOfRange(f"{name} must be an integer in 1..5, got {value!r}")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.rater_id, self.profile_id, self.config_label)


@dataclass(frozen=True)
class ReviewItem:
    item_token: str
    material_text: str
    profile_summary: str


@dataclass
class ReviewSession:
    session_id: str
    rater_id: str
    seed: int
    items: list[ReviewItem]
    # token -> (profile_id, config_label); never serialized to clients
    resolve: dict[str, tuple[str, str]] = field(repr=False, default_factory=dict)

    def client_items(self) -> list[dict]:
        return [
            {"item_token": it.item_token, "material_text": it.material_text,
             "profile_summary": it.profile_summary, "position": i + 1,
             "total": len(self.items)}
            for i, it in enumerate(self.items)
        ]


def build_review_session(
    run: RunArtifacts,
    include: list[str],
    rater_id: str,
    seed: int,
) -> ReviewSession:
    """Seeded, blinded permutation of the run's included outputs.

    Order is a pure function of (run content hash, include set, rater_id,
    seed); each rater gets an independent shuffle because the rater id is
    part of the seed material.
    """
    if not include:
        raise ValueError("include must be non-empty")
    available = run.labels
    for label in include:
        if label not in available:
            raise UnknownConfigLabel(label)
    included = set(include)
    records = sorted(
        (r for r in run.records if r.config_label in included),
        key=lambda r: (r.profile_id, r.config_label),
    )
    seed_material = f"{run.content_hash}|{','.join(sorted(included))}|{rater_id}|{seed}"
    digest = hashlib.sha256(seed_material.encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest, "big"))
    rng.shuffle(records)

    session_id = hashlib.sha256(f"sid|{seed_material}".encode("utf-8")).hexdigest()[:16]
    items = []
    resolve = {}
    for position, record in enumerate(records):
        token = hashlib.sha256(f"tok|{session_id}|{position}".encode("utf-8")).hexdigest()[:24]
        items.append(ReviewItem(
            item_token=token,
            material_text=record.text,
            profile_summary=record.profile_summary,
        ))
        resolve[token] = (record.profile_id, record.config_label)
    return ReviewSession(session_id=session_id, rater_id=rater_id, seed=seed,
                         items=items, resolve=resolve)


class ScoreStore:
    """Latest score per (rater, profile, config) plus an append-only audit log.

    With a path, every accepted submission is appended as JSONL and replayed
    on startup, so a review service restart loses nothing.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._current: dict[tuple[str, str, str], LikertRecord] = {}
        self.audit: list[dict] = []
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._apply(entry, persist=False)

    def _apply(self, entry: dict, persist: bool) -> LikertRecord:
        record = LikertRecord(
            rater_id=entry["rater_id"], profile_id=entry["profile_id"],
            config_label=entry["config_label"], redundancy=entry["redundancy"],
            accuracy=entry["accuracy"], completeness=entry["completeness"],
        )
        self._current[record.key] = record
        self.audit.append(entry)
        if persist and self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return record

    def record(self, rater_id: str, profile_id: str, config_label: str,
               redundancy: int, accuracy: int, completeness: int) -> LikertRecord:
        return self._apply({
            "ts": datetime.now(timezone.utc).isoformat(),
            "rater_id": rater_id, "profile_id": profile_id, "config_label": config_label,
            "redundancy": redundancy, "accuracy": accuracy, "completeness": completeness,
        }, persist=True)

    def get(self, rater_id: str, profile_id: str, config_label: str) -> LikertRecord | None:
        return self._current.get((rater_id, profile_id, config_label))

    def records(self) -> list[LikertRecord]:
        return [self._current[key] for key in sorted(self._current)]

    def __len__(self) -> int:
        return len(self._current)


def record_score(store: ScoreStore, session: ReviewSession, item_token: str,
                 scores: dict) -> dict:
    """Resolve a session token server-side and persist the Likert record."""
    resolved = session.resolve.get(item_token)
    if resolved is None:
        raise UnknownItemToken(f"token {item_token!r} does not belong to session "
                               f"{session.session_id}")
    profile_id, config_label = resolved
    try:
        values = {name: scores[name] for name in ("redundancy", "accuracy", "completeness")}
    except KeyError as exc:
        raise ScoreOutOfRange(f"missing score field {exc.args[0]!r}") from None
    store.record(session.rater_id, profile_id, config_label, **values)
    scored = session_progress(session, store)
    return {"ok": True, "scored": scored, "total": len(session.items)}


def session_progress(session: ReviewSession, store: ScoreStore) -> int:
    return sum(
        1 for token, (profile_id, config_label) in session.resolve.items()
        if store.get(session.rater_id, profile_id, config_label) is not None
    )


def next_unscored(session: ReviewSession, store: ScoreStore) -> dict | None:
    for i, item in enumerate(session.items):
        profile_id, config_label = session.resolve[item.item_token]
        if store.get(session.rater_id, profile_id, config_label) is None:
            return {
                "item_token": item.item_token,
                "material_text": item.material_text,
                "profile_summary": item.profile_summary,
                "position": i + 1,
                "total": len(session.items),
            }
    return None


# --- CSV interchange ---------------------------------------------------------

def export_scores(records: list[LikertRecord], csv_path: str | Path) -> int:
    rows = sorted(records, key=lambda r: r.key)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.rater_id, r.profile_id, r.config_label,
                             r.redundancy, r.accuracy, r.completeness])
    return len(rows)


def export_scores_text(records: list[LikertRecord]) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in sorted(records, key=lambda r: r.key):
        lines.append(f"{r.rater_id},{r.profile_id},{r.config_label},"
                     f"{r.redundancy},{r.accuracy},{r.completeness}")
    return "\n".join(lines) + "\n"


def import_scores(csv_path: str | Path) -> list[LikertRecord]:
    """Read and validate a scores CSV; duplicates and bad rows are errors."""
    records: list[LikertRecord] = []
    seen: set[tuple[str, str, str]] = set()
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file, expected header") from None
        if header != CSV_HEADER:
            raise MalformedRow(1, f"header must be {','.join(CSV_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise MalformedRow(line_no, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
            rater_id, profile_id, config_label = row[0], row[1], row[2]
            if not rater_id or not profile_id or not config_label:
                raise MalformedRow(line_no, "empty key field")
            try:
                scores = [int(v) for v in row[3:6]]
            except ValueError:
                raise MalformedRow(line_no, f"non-integer score in {row[3:6]}") from None
            try:
                record = LikertRecord(rater_id, profile_id, config_label, *scores)
            except ScoreOutOfRange as exc:
                raise MalformedRow(line_no, str(exc)) from None
            if record.key in seen:
                raise DuplicateKey(f"line {line_no}: duplicate key {record.key}")
            seen.add(record.key)
            records.append(record)
    return records
