from __future__ import annotations

import csv
import json
import math
import random

import numpy as np
import pytest
from scipy import stats as scipy_stats

from ragmat.errors import DegenerateInput, EmptyGroup, InsufficientData, LabelMismatch
from ragmat.ratings import LikertRecord
from ragmat.stats import (
    AnovaResult,
    icc_matrix,
    icc_two_way,
    one_way_anova,
    ragfs_vs_nrag_ttests,
    render_reports,
    round_half_away,
    summarize,
    welch_t,
)

# Integer 1..5 score multisets engineered so that (mean, sample SD) round to
# exact known report cells; counts[i] is how many scores of value i+1.
ROW1_REDUNDANCY = (6, 0, 1, 26, 27)       # n=60 -> 4.13 (1.17)
ROW1_ACCURACY = (15, 2, 27, 16, 0)        # n=60 -> 2.73 (1.12)
ROW1_COMPLETENESS = (18, 32, 10, 0, 0)    # n=60 -> 1.87 (0.68)
GPT4O_REDUNDANCY = (2, 1, 0, 29, 23)      # n=55 -> 4.27 (0.87)

# Shrout & Fleiss (1979) Table 2 ratings: 6 subjects x 4 raters. The
# published single-rater absolute-agreement ICC for it is 0.29.
SF_TABLE2 = [
    [9, 2, 5, 8],
    [6, 1, 3, 2],
    [8, 4, 6, 8],
    [7, 1, 2, 6],
    [10, 5, 6, 9],
    [6, 2, 4, 7],
]


def expand(counts):
    out = []
    for value, count in enumerate(counts, start=1):
        out.extend([value] * count)
    return out


def records_from_counts(label, red, acc, comp, n_raters=2):
    reds, accs, comps = expand(red), expand(acc), expand(comp)
    n = len(reds)
    assert len(accs) == len(comps) == n
    records = []
    for i in range(n):
        rater = f"r{i % n_raters + 1}"
        profile = f"p{i // n_raters:02d}"
        records.append(LikertRecord(rater, profile, label, reds[i], accs[i], comps[i]))
    return records


def icc21_oracle(matrix):
    """Reference ICC(2,1) via numpy variance decomposition (independent of
    the package's pure-python route)."""
    y = np.asarray(matrix, dtype=float)
    n, k = y.shape
    msr = k * np.var(y.mean(axis=1), ddof=1)
    msc = n * np.var(y.mean(axis=0), ddof=1)
    sst = ((y - y.mean()) ** 2).sum()
    mse = (sst - msr * (n - 1) - msc * (k - 1)) / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)


# --- summarize -----------------------------------------------------------------

def test_summarize_singleton():
    [summary] = summarize([LikertRecord("r1", "p1", "CFG", 4, 3, 2)])
    assert summary.n == 1
    assert (summary.redundancy.mean, summary.accuracy.mean, summary.completeness.mean) == \
        (4.0, 3.0, 2.0)
    assert summary.redundancy.sd == 0.0
    assert summary.total_score == 9.0


def test_summarize_two_raters_mean():
    records = [LikertRecord("r1", "p1", "CFG", 4, 4, 4),
               LikertRecord("r2", "p1", "CFG", 5, 4, 4)]
    [summary] = summarize(records)
    assert summary.redundancy.mean == 4.5


def test_summarize_empty_raises():
    with pytest.raises(EmptyGroup):
        summarize([])


def test_summarize_matches_gpt4o_ragfs_moments():
    # accuracy/completeness columns are irrelevant here; reuse valid shapes
    acc = (0, 0, 0, 27, 28)
    comp = (0, 27, 28, 0, 0)
    records = records_from_counts("GPT-4O_RAGFS", GPT4O_REDUNDANCY, acc, comp)
    assert len(records) == 55
    [summary] = summarize(records)
    assert round_half_away(summary.redundancy.mean) == 4.27
    assert round_half_away(summary.redundancy.sd) == 0.87


def test_total_score_is_sum_of_category_means():
    rng = random.Random(2)
    records = [
        LikertRecord(f"r{i%2+1}", f"p{i//2}", "CFG",
                     rng.randint(1, 5), rng.randint(1, 5), rng.randint(1, 5))
        for i in range(40)
    ]
    [summary] = summarize(records)
    expected = summary.redundancy.mean + summary.accuracy.mean + summary.completeness.mean
    assert summary.total_score == pytest.approx(expected, abs=1e-12)


# --- one_way_anova -----------------------------------------------------------------

def test_anova_zero_f_when_group_means_equal():
    result = one_way_anova([("a", [1.0, 2.0, 3.0]), ("b", [0.0, 2.0, 4.0])])
    assert result.f_stat == 0.0
    assert result.p_value == pytest.approx(1.0)


def test_anova_df_shape_for_10_groups_597_observations():
    rng = random.Random(0)
    sizes = [60] * 7 + [59] * 3  # 597 observations across 10 configurations
    groups = [(f"g{i}", [rng.randint(1, 5) for _ in range(size)])
              for i, size in enumerate(sizes)]
    result = one_way_anova(groups)
    assert (result.df_between, result.df_within) == (9, 587)


def test_anova_frozen_reference_fixture():
    result = one_way_anova([("g1", [1, 2, 3]), ("g2", [2, 3, 4]), ("g3", [6, 7, 8])])
    assert result.f_stat == pytest.approx(21.0, abs=1e-9)
    assert result.p_value == pytest.approx(0.001953125, abs=1e-9)


def test_anova_agrees_with_scipy_on_random_fixtures():
    rng = random.Random(31)
    for _ in range(100):
        groups = []
        for g in range(rng.randint(2, 6)):
            size = rng.randint(2, 12)
            groups.append((f"g{g}", [rng.gauss(rng.uniform(-2, 2), 1.0)
                                     for _ in range(size)]))
        ours = one_way_anova(groups)
        f_ref, p_ref = scipy_stats.f_oneway(*[obs for _, obs in groups])
        assert ours.f_stat == pytest.approx(f_ref, abs=1e-9)
        assert ours.p_value == pytest.approx(p_ref, abs=1e-9)


def test_anova_permutation_and_shift_invariance():
    rng = random.Random(5)
    groups = [(f"g{i}", [rng.gauss(i, 1) for _ in range(8)]) for i in range(4)]
    base = one_way_anova(groups)
    permuted = one_way_anova(list(reversed(groups)))
    assert permuted.f_stat == pytest.approx(base.f_stat, abs=1e-9)
    assert (permuted.df_between, permuted.df_within) == (base.df_between, base.df_within)
    shifted = one_way_anova([(g, [x + 17.5 for x in obs]) for g, obs in groups])
    assert shifted.f_stat == pytest.approx(base.f_stat, abs=1e-9)


def test_anova_degenerate_all_identical():
    result = one_way_anova([("a", [3.0, 3.0]), ("b", [3.0, 3.0, 3.0])])
    assert result.degenerate
    assert result.f_stat == 0.0 and result.p_value == 1.0


def test_anova_input_validation():
    with pytest.raises(DegenerateInput):
        one_way_anova([("a", [1.0, 2.0])])
    with pytest.raises(DegenerateInput):
        one_way_anova([("a", []), ("b", [1.0, 2.0])])
    with pytest.raises(DegenerateInput):
        one_way_anova([("a", [1.0]), ("b", [2.0])])


# --- welch_t ---------------------------------------------------------------------------

def test_welch_identical_samples():
    result = welch_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert result.t == 0.0
    assert result.p == pytest.approx(1.0)


def test_welch_antisymmetry():
    a = [0.3, 1.2, -0.5, 0.9]
    b = [2.0, 2.5, 1.8, 2.2, 2.6]
    fwd = welch_t(a, b)
    rev = welch_t(b, a)
    assert rev.t == pytest.approx(-fwd.t, abs=1e-12)
    assert rev.p == pytest.approx(fwd.p, abs=1e-12)
    assert rev.df == pytest.approx(fwd.df, abs=1e-12)


def test_welch_agrees_with_scipy_on_random_fixtures():
    rng = random.Random(77)
    for _ in range(100):
        a = [rng.gauss(0, rng.uniform(0.5, 2)) for _ in range(rng.randint(2, 20))]
        b = [rng.gauss(rng.uniform(-1, 1), rng.uniform(0.5, 2))
             for _ in range(rng.randint(2, 20))]
        ours = welch_t(a, b)
        ref = scipy_stats.ttest_ind(a, b, equal_var=False)
        assert ours.t == pytest.approx(ref.statistic, abs=1e-9)
        assert ours.p == pytest.approx(ref.pvalue, abs=1e-9)


def test_welch_separated_samples_significant():
    rng = random.Random(3)
    a = [rng.gauss(0, 1) for _ in range(30)]
    b = [rng.gauss(5, 1) for _ in range(30)]
    assert welch_t(a, b).p < 0.001


def test_welch_reduces_to_pooled_df_for_equal_shapes():
    a = [1.0, 2.0, 3.0, 4.0]
    b = [2.0, 3.0, 4.0, 5.0]  # same variance, same n
    result = welch_t(a, b)
    assert result.df == pytest.approx(len(a) + len(b) - 2, abs=1e-9)


def test_welch_degenerate():
    with pytest.raises(DegenerateInput):
        welch_t([2.0, 2.0], [2.0, 2.0])
    with pytest.raises(DegenerateInput):
        welch_t([1.0], [1.0, 2.0])


# --- icc_two_way -----------------------------------------------------------------------

def test_icc_shrout_fleiss_worked_example():
    result = icc_two_way(SF_TABLE2)
    assert result.estimate == pytest.approx(0.29, abs=1e-3)
    assert result.estimate == pytest.approx(icc21_oracle(SF_TABLE2), abs=1e-12)
    assert result.ci_low <= result.estimate <= result.ci_high
    assert (result.n_subjects, result.n_raters) == (6, 4)


def test_icc_perfect_agreement():
    ratings = [[1, 1], [2, 2], [3, 3], [4, 4], [5, 5], [2, 2]]
    result = icc_two_way(ratings)
    assert result.estimate == 1.0
    assert result.ci_low == result.ci_high == 1.0


def test_icc_anticorrelated_raters_negative():
    ratings = [[1, 5], [2, 4], [3, 3], [4, 2], [5, 1], [1, 5], [5, 1]]
    result = icc_two_way(ratings)
    assert result.estimate < 0
    assert -1.0 <= result.ci_low <= result.estimate <= result.ci_high <= 1.0
    # the raw estimator undershoots -1 here; the result clamps to the bound
    clamped_oracle = max(-1.0, min(1.0, icc21_oracle(ratings)))
    assert result.estimate == pytest.approx(clamped_oracle, abs=1e-12)


def test_icc_moderate_disagreement_matches_oracle_unclamped():
    ratings = [[3, 3], [2, 1], [3, 2], [1, 3], [3, 2], [2, 3], [3, 3], [1, 5]]
    result = icc_two_way(ratings)
    oracle = icc21_oracle(ratings)
    assert -1.0 < oracle < 0.0  # fixture stays inside the legal range
    assert result.estimate == pytest.approx(oracle, abs=1e-12)
    assert result.ci_low <= result.estimate <= result.ci_high


def test_icc_unrelated_raters_near_zero():
    rng = random.Random(9)
    ratings = [[rng.gauss(0, 1), rng.gauss(0, 1)] for _ in range(400)]
    result = icc_two_way(ratings)
    assert abs(result.estimate) < 0.15
    assert result.ci_low < 0 < result.ci_high
    assert result.estimate == pytest.approx(icc21_oracle(ratings), abs=1e-9)


def test_icc_listwise_deletion_and_minimum_subjects():
    ratings = [[1, 2], [2, None], [3, 3], [4, 4], [5, 4], [2, 2], [float("nan"), 1]]
    result = icc_two_way(ratings)
    assert result.n_subjects == 5
    with pytest.raises(InsufficientData):
        icc_two_way([[1, 2], [2, 3], [3, 4], [4, 5]])
    with pytest.raises(InsufficientData):
        icc_two_way([[3, 3]] * 10)  # no variance anywhere


def test_icc_matrix_builds_subject_rows():
    records = []
    for rater in ("r1", "r2"):
        for p in range(6):
            records.append(LikertRecord(rater, f"p{p}", "CFG", (p % 5) + 1, 3, 3))
    matrix = icc_matrix(records, "redundancy")
    assert len(matrix) == 6
    assert all(len(row) == 2 for row in matrix)
    result = icc_two_way(matrix)
    assert result.estimate == 1.0  # identical raters by construction


# --- reports ------------------------------------------------------------------------------

def build_row1_records():
    return records_from_counts("GPT-3.5-TURBO_RAGFS",
                               ROW1_REDUNDANCY, ROW1_ACCURACY, ROW1_COMPLETENESS)


def readability_rows_for(labels, base=60.0):
    rows = []
    for i, label in enumerate(labels):
        for p in range(3):
            rows.append({
                "config_label": label, "profile_id": f"p{p:02d}",
                "fres": base + 10 * i + p, "grade_label": "?",
                "num_words": 100 + p, "num_syllables": 150 + p, "num_sentences": 10 + p,
            })
    return rows


def test_render_reports_reproduces_table2_row1_cell(tmp_path):
    records = build_row1_records()
    summaries = summarize(records)
    paths = render_reports(summaries, readability_rows_for(["GPT-3.5-TURBO_RAGFS"]),
                           {}, {}, tmp_path)
    table2 = next(p for p in paths if p.name == "table2.csv")
    with open(table2, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["config_label"] == "GPT-3.5-TURBO_RAGFS"
    assert rows[0]["redundancy"] == "4.13 (1.17)"
    assert rows[0]["accuracy"] == "2.73 (1.12)"
    assert rows[0]["completeness"] == "1.87 (0.68)"


def test_render_reports_radar_shape(tmp_path):
    records = build_row1_records()
    for rec in records_from_counts("OTHER_NRAG", ROW1_REDUNDANCY, ROW1_ACCURACY,
                                   ROW1_COMPLETENESS):
        records.append(rec)
    for rec in records_from_counts("THIRD_RAGNFS", ROW1_REDUNDANCY, ROW1_ACCURACY,
                                   ROW1_COMPLETENESS):
        records.append(rec)
    summaries = summarize(records)
    labels = [s.config_label for s in summaries]
    paths = render_reports(summaries, readability_rows_for(labels), {}, {}, tmp_path)
    radar = json.loads((tmp_path / "radar.json").read_text(encoding="utf-8"))
    assert len(radar["axes"]) == 4
    assert len(radar["series"]) == 3
    for series in radar["series"]:
        assert len(series["values"]) == 4
        assert all(math.isfinite(v) for v in series["values"])
        assert 0.0 <= series["values"][3] <= 1.0


def test_render_reports_omits_table3_without_readability(tmp_path):
    summaries = summarize(build_row1_records())
    paths = render_reports(summaries, [], {}, {}, tmp_path)
    names = {p.name for p in paths}
    assert "table3.csv" not in names
    assert "radar.json" not in names
    assert "notices.txt" in names
    assert "table3" in (tmp_path / "notices.txt").read_text(encoding="utf-8")


def test_render_reports_label_mismatch(tmp_path):
    summaries = summarize(build_row1_records())
    rows = readability_rows_for(["SOME_OTHER_LABEL"])
    with pytest.raises(LabelMismatch):
        render_reports(summaries, rows, {}, {}, tmp_path)


def test_render_reports_writes_anova_and_icc(tmp_path):
    records = build_row1_records()
    anova = one_way_anova([("a", [1.0, 2.0, 3.0]), ("b", [4.0, 5.0, 6.0])])
    icc = icc_two_way(SF_TABLE2)
    render_reports(summarize(records), [], {"redundancy": anova},
                   {"redundancy": icc}, tmp_path)
    anova_data = json.loads((tmp_path / "anova.json").read_text(encoding="utf-8"))
    assert anova_data["redundancy"]["df_between"] == 1
    icc_data = json.loads((tmp_path / "icc.json").read_text(encoding="utf-8"))
    assert icc_data["redundancy"]["estimate"] == pytest.approx(0.29, abs=1e-3)


def test_ragfs_vs_nrag_ttests_pairs_by_model():
    rows = readability_rows_for(["M1_RAGFS", "M1_NRAG", "M2_RAGFS"], base=50.0)
    results = ragfs_vs_nrag_ttests(rows)
    assert set(results) == {"M1"}
    ref = scipy_stats.ttest_ind([50.0, 51.0, 52.0], [60.0, 61.0, 62.0], equal_var=False)
    assert results["M1"].t == pytest.approx(ref.statistic, abs=1e-9)


def test_round_half_away():
    assert round_half_away(4.125) == 4.13
    assert round_half_away(-4.125) == -4.13
    assert round_half_away(4.1349) == 4.13
    assert round_half_away(2.0) == 2.0
