"""Readability measures for generated materials.

Model outputs arrive as markdown-ish text (bold markers, numbered lists,
sometimes literal "\\n" escapes), so scoring runs in three passes: strip the
markup while terminating each list item as a sentence, tokenize into words
and sentences, then apply the Flesch reading-ease formula. The syllable
counter is the classic vowel-group heuristic; counts are reproducible
against this module's own rules, not against any external tool.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DegenerateText

VOWELS = "aeiouy"

# Sentence terminals, only when followed by whitespace or end of text.
_TERMINAL_RE = re.compile(r"[.!?]+(?=\s|$)")

# Words: runs of letters/digits, with apostrophes and hyphens allowed inside.
_WORD_RE = re.compile(r"[A-Za-z0-9]+(?:['’-][A-Za-z0-9]+)*")

_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")

_LIST_MARKER_RE = re.compile(r"^\s*(?:#+\s*|-\s+|\d+\.\s*)")

# Tokens whose trailing period does not end a sentence.
ABBREVIATIONS = frozenset({
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "vs.", "e.g.", "i.e.", "fig.",
})


@dataclass(frozen=True)
class TextCounts:
    num_words: int
    num_syllables: int
    num_sentences: int


@dataclass(frozen=True)
class ReadabilityReport:
    counts: TextCounts
    fres: float
    grade_label: str


def strip_markup(text: str) -> str:
    """Flatten markdown to plain prose for counting.

    Emphasis markers (*, **, _) go everywhere; heading/list markers go at
    line starts. Lines without terminal punctuation get a period appended
    before joining, so headings and list items each count as a sentence.
    """
    if not text:
        return ""
    text = text.replace("\\n", "\n")
    lines = []
    for raw in text.splitlines():
        line = _LIST_MARKER_RE.sub("", raw.strip())
        line = line.replace("*", "").replace("_", "").strip()
        if not line:
            continue
        if line[-1] not in ".!?":
            line += "."
        lines.append(line)
    return " ".join(lines)


def tokenize(text: str) -> tuple[list[str], list[str]]:
    """Split markup-stripped text into (words, sentences)."""
    words = _WORD_RE.findall(text)

    sentences = []
    start = 0
    for match in _TERMINAL_RE.finditer(text):
        preceding = re.search(r"\S+$", text[:match.end()])
        token = preceding.group(0).lower().lstrip("\"'([{") if preceding else ""
        if token in ABBREVIATIONS:
            continue
        candidate = text[start:match.end()].strip()
        if _WORD_RE.search(candidate):
            sentences.append(candidate)
        start = match.end()
    tail = text[start:].strip()
    if _WORD_RE.search(tail):
        sentences.append(tail)
    return words, sentences


def count_syllables(word: str) -> int:
    """Vowel-group heuristic, floored at one syllable.

    Counts maximal runs of a/e/i/o/u/y, then drops one for a terminal
    silent 'e' unless the word ends in consonant+'le' (ta-ble, syl-la-ble).
    """
    if not word:
        raise ValueError("word must be non-empty")
    w = word.lower()
    groups = len(_VOWEL_GROUP_RE.findall(w))
    if w.endswith("e"):
        consonant_le = (
            len(w) >= 3 and w.endswith("le") and w[-3].isalpha() and w[-3] not in VOWELS
        )
        if not consonant_le:
            groups -= 1
    return max(1, groups)


def text_counts(text: str) -> TextCounts:
    words, sentences = tokenize(strip_markup(text))
    return TextCounts(
        num_words=len(words),
        num_syllables=sum(count_syllables(w) for w in words),
        num_sentences=len(sentences),
    )


def fres(counts: TextCounts) -> float:
    """Flesch Reading Ease. Deliberately not clamped to [0, 100]: easy texts
    can legitimately score above 100."""
    if counts.num_words < 1 or counts.num_sentences < 1:
        raise DegenerateText(
            f"need >=1 word and >=1 sentence, got {counts.num_words} words, "
            f"{counts.num_sentences} sentences")
    return (206.835
            - 1.015 * (counts.num_words / counts.num_sentences)
            - 84.6 * (counts.num_syllables / counts.num_words))


_GRADE_BANDS = (
    (90.0, "5th Grade"),
    (80.0, "6th Grade"),
    (70.0, "7th Grade"),
    (60.0, "9th Grade"),
    (50.0, "10th-12th Grade"),
    (30.0, "College"),
)


def grade_label(score: float) -> str:
    for floor, label in _GRADE_BANDS:
        if score >= floor:
            return label
    return "College Graduate"


def analyze(text: str) -> ReadabilityReport:
    counts = text_counts(text)
    score = fres(counts)
    return ReadabilityReport(counts=counts, fres=score, grade_label=grade_label(score))
