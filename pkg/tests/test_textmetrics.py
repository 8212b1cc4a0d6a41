from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from ragmat.errors import DegenerateText
from ragmat.textmetrics import (
    TextCounts,
    analyze,
    count_syllables,
    fres,
    grade_label,
    strip_markup,
    text_counts,
    tokenize,
)

FIXTURES = Path(__file__).parent / "fixtures"

# Twelve (FRES, label) pairs spanning every band the readability report emits.
TABLE3_PAIRS = [
    (72.44, "7th Grade"),
    (63.06, "9th Grade"),
    (65.00, "9th Grade"),
    (96.59, "5th Grade"),
    (90.48, "5th Grade"),
    (88.13, "6th Grade"),
    (95.73, "5th Grade"),
    (87.69, "6th Grade"),
    (90.90, "5th Grade"),
    (103.33, "5th Grade"),
    (93.18, "5th Grade"),
    (91.42, "5th Grade"),
]


# --- strip_markup --------------------------------------------------------------

def test_strip_removes_emphasis_markers():
    assert strip_markup("**Get Close:** Keep the item close to your body.") == \
        "Get Close: Keep the item close to your body."


def test_strip_empty_text():
    assert strip_markup("") == ""


def test_strip_list_markers_and_headings():
    text = "# Title\n1. First item.\n2. Second item.\n- Third item."
    assert strip_markup(text) == "Title. First item. Second item. Third item."


def test_strip_appends_period_to_unterminated_lines():
    assert strip_markup("A heading line\nBody sentence.") == "A heading line. Body sentence."


def test_strip_handles_escaped_newlines():
    assert strip_markup("First\\nSecond.") == "First. Second."


def test_table1_example1_output_counts_six_sentences():
    pairs = json.loads((FIXTURES / "table1_fewshot.json").read_text(encoding="utf-8"))
    stripped = strip_markup(pairs[0]["output"])
    _, sentences = tokenize(stripped)
    assert len(sentences) == 6  # title line plus five list items


# --- tokenize --------------------------------------------------------------------

def test_tokenize_simple_sentence():
    words, sentences = tokenize("The cat sat on the mat.")
    assert len(words) == 6
    assert len(sentences) == 1


def test_tokenize_two_terminals():
    words, sentences = tokenize("Stop! Now.")
    assert len(words) == 2
    assert len(sentences) == 2


def test_tokenize_protects_abbreviations():
    words, sentences = tokenize("See Dr. Smith today.")
    assert len(words) == 4
    assert len(sentences) == 1
    _, sentences = tokenize("Use ice (e.g. a cold pack) daily. Then rest.")
    assert len(sentences) == 2


def test_tokenize_keeps_apostrophes_and_hyphens_in_words():
    words, _ = tokenize("Don't over-exert yourself.")
    assert words == ["Don't", "over-exert", "yourself"]


def test_tokenize_counts_trailing_fragment_as_sentence():
    words, sentences = tokenize("No terminal punctuation here")
    assert len(words) == 4
    assert len(sentences) == 1


def test_tokenize_decimal_numbers_do_not_split():
    _, sentences = tokenize("Take 2.5 mg daily. Rest after.")
    assert len(sentences) == 2


# --- count_syllables --------------------------------------------------------------

@pytest.mark.parametrize("word,expected", [
    ("the", 1),
    ("education", 4),
    ("table", 2),
    ("cat", 1),
    ("free", 1),
    ("whole", 1),
    ("syllable", 3),
    ("ale", 1),
    ("yellow", 2),
    ("strength", 1),
    ("tidy", 2),
])
def test_count_syllables_samples(word, expected):
    assert count_syllables(word) == expected


def test_count_syllables_floor_one():
    for word in ("mmm", "tsk", "2023", "b"):
        assert count_syllables(word) == 1


# --- fres ---------------------------------------------------------------------------

def test_fres_hand_values():
    assert fres(TextCounts(6, 6, 1)) == pytest.approx(116.145, abs=1e-9)
    assert fres(TextCounts(100, 100, 10)) == pytest.approx(112.085, abs=1e-9)
    # W/S = 8.24, Sy/W ~ 1.36 exercises the 80-90 band
    assert fres(TextCounts(206, 280, 25)) == pytest.approx(83.48110873786409, abs=1e-9)
    assert grade_label(fres(TextCounts(206, 280, 25))) == "6th Grade"


def test_fres_not_clamped_above_100():
    assert fres(TextCounts(6, 6, 6)) > 100.0


def test_fres_degenerate_inputs():
    with pytest.raises(DegenerateText):
        fres(TextCounts(0, 0, 1))
    with pytest.raises(DegenerateText):
        fres(TextCounts(5, 5, 0))


def test_fres_monotonicity():
    rng = random.Random(0)
    for _ in range(500):
        w = rng.randint(1, 500)
        s = rng.randint(1, max(1, w))
        sy = rng.randint(w, 3 * w)
        base = fres(TextCounts(w, sy, s))
        assert fres(TextCounts(w, sy + 1, s)) < base
        assert fres(TextCounts(w, sy, s + 1)) > base


# --- grade_label ----------------------------------------------------------------------

@pytest.mark.parametrize("score,label", TABLE3_PAIRS)
def test_grade_label_reproduces_reported_pairs(score, label):
    assert grade_label(score) == label


def test_grade_label_band_edges():
    assert grade_label(90.0) == "5th Grade"
    assert grade_label(89.999) == "6th Grade"
    assert grade_label(80.0) == "6th Grade"
    assert grade_label(70.0) == "7th Grade"
    assert grade_label(60.0) == "9th Grade"
    assert grade_label(50.0) == "10th-12th Grade"
    assert grade_label(30.0) == "College"
    assert grade_label(29.999) == "College Graduate"
    assert grade_label(-12.0) == "College Graduate"


# --- counts / analyze --------------------------------------------------------------

def test_text_counts_invariants_on_generated_text():
    rng = random.Random(1)
    vocab = ["back", "pain", "gently", "stretch", "daily", "breathe", "walk",
             "education", "table", "simple"]
    for _ in range(50):
        n_sent = rng.randint(1, 6)
        text = " ".join(
            " ".join(rng.choices(vocab, k=rng.randint(1, 9))).capitalize() + "."
            for _ in range(n_sent)
        )
        counts = text_counts(text)
        assert counts.num_syllables >= counts.num_words
        assert counts.num_sentences >= 1
        assert counts.num_sentences == n_sent


def test_analyze_end_to_end():
    report = analyze("**Stay Active:** \n1. Walk daily.\n2. Stretch gently.")
    assert report.counts.num_sentences == 3
    assert report.counts.num_words == 6
    assert report.grade_label == grade_label(report.fres)
    assert report.fres == fres(report.counts)
