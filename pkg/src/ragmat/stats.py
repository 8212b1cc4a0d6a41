"""Aggregation and inferential statistics over Likert scores and readability.

Per-configuration summaries pool both raters' scores. The omnibus test is a
classic one-way ANOVA over individual rater scores (the observation unit the
reported degrees of freedom imply), pairwise comparisons use Welch's
unequal-variance t, and inter-rater reliability is ICC(2,1): two-way random
effects, absolute agreement, single rater, with the Shrout-Fleiss F-based
95% interval. Nothing is rounded internally; reports round half away from
zero to two decimals.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .distributions import f_ppf, f_sf, t_p_two_sided
from .errors import (
    DegenerateInput,
    EmptyGroup,
    InsufficientData,
    LabelMismatch,
)
from .ratings import LikertRecord
from .textmetrics import grade_label as fres_grade_label

CATEGORIES = ("redundancy", "accuracy", "completeness")


@dataclass(frozen=True)
class CategoryStats:
    mean: float
    sd: float


@dataclass(frozen=True)
class ConfigSummary:
    config_label: str
    n: int
    redundancy: CategoryStats
    accuracy: CategoryStats
    completeness: CategoryStats
    total_score: float

    def category(self, name: str) -> CategoryStats:
        return getattr(self, name)


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class IccResult:
    estimate: float
    ci_low: float
    ci_high: float
    n_subjects: int
    n_raters: int


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _sample_sd(xs: Sequence[float]) -> float:
    # n=1 groups report sd 0; the summary's n field flags the degeneracy.
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def summarize(records: list[LikertRecord]) -> list[ConfigSummary]:
    """Per-config category means/SDs over all records (raters pooled)."""
    if not records:
        raise EmptyGroup("no Likert records to summarize")
    by_label: dict[str, list[LikertRecord]] = {}
    for rec in records:
        by_label.setdefault(rec.config_label, []).append(rec)
    out = []
    for label in sorted(by_label):
        group = by_label[label]
        stats = {}
        for cat in CATEGORIES:
            values = [float(getattr(r, cat)) for r in group]
            stats[cat] = CategoryStats(mean=_mean(values), sd=_sample_sd(values))
        out.append(ConfigSummary(
            config_label=label,
            n=len(group),
            redundancy=stats["redundancy"],
            accuracy=stats["accuracy"],
            completeness=stats["completeness"],
            total_score=sum(stats[cat].mean for cat in CATEGORIES),
        ))
    return out


def one_way_anova(groups: list[tuple[str, list[float]]]) -> AnovaResult:
    """Between/within decomposition with the upper-tail F p-value."""
    if len(groups) < 2:
        raise DegenerateInput("ANOVA needs at least 2 groups")
    sizes = [len(obs) for _, obs in groups]
    if any(n < 1 for n in sizes):
        raise DegenerateInput("every group needs at least 1 observation")
    if all(n < 2 for n in sizes):
        raise DegenerateInput("at least one group needs >= 2 observations")

    total_n = sum(sizes)
    df_between = len(groups) - 1
    df_within = total_n - len(groups)
    everything = [x for _, obs in groups for x in obs]
    grand = _mean(everything)

    if all(x == everything[0] for x in everything):
        return AnovaResult(0.0, df_between, df_within, 1.0, degenerate=True)

    ss_between = sum(len(obs) * (_mean(obs) - grand) ** 2 for _, obs in groups)
    ss_within = sum((x - _mean(obs)) ** 2 for _, obs in groups for x in obs)
    if ss_within == 0.0:
        # Groups internally constant but different from each other.
        return AnovaResult(math.inf, df_between, df_within, 0.0)
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(f_stat, df_between, df_within, f_sf(f_stat, df_between, df_within))


def welch_t(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t with Welch-Satterthwaite df, two-sided p."""
    if len(a) < 2 or len(b) < 2:
        raise DegenerateInput("each sample needs at least 2 observations")
    na, nb = len(a), len(b)
    ma, mb = _mean(a), _mean(b)
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    if va == 0.0 and vb == 0.0:
        raise DegenerateInput("both samples have zero variance")
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return WelchResult(t=t, df=df, p=t_p_two_sided(t, df))


def icc_two_way(ratings: Sequence[Sequence[float | None]]) -> IccResult:
    """ICC(2,1): two-way random effects, absolute agreement, single rater.

    Rows are subjects, columns raters; rows with any missing value are
    dropped (listwise deletion). The 95% CI is the Shrout-Fleiss F-based
    interval; estimates below zero are legitimate.
    """
    rows = [
        [float(v) for v in row]
        for row in ratings
        if all(v is not None and not (isinstance(v, float) and math.isnan(v)) for v in row)
    ]
    if not rows:
        raise InsufficientData("no complete rows")
    k = len(rows[0])
    if any(len(row) != k for row in rows):
        raise InsufficientData("ragged ratings matrix")
    if k < 2:
        raise InsufficientData("need at least 2 raters")
    n = len(rows)
    if n < 5:
        raise InsufficientData(f"need >= 5 complete subjects, got {n}")

    grand = _mean([v for row in rows for v in row])
    row_means = [_mean(row) for row in rows]
    col_means = [_mean([row[j] for row in rows]) for j in range(k)]
    ss_total = sum((v - grand) ** 2 for row in rows for v in row)
    ss_rows = k * sum((m - grand) ** 2 for m in row_means)
    ss_cols = n * sum((m - grand) ** 2 for m in col_means)
    ss_err = ss_total - ss_rows - ss_cols
    # Snap decomposition residue to zero so perfect agreement yields exactly 1.
    if ss_err < ss_total * 1e-12:
        ss_err = 0.0
    if ss_cols < ss_total * 1e-12:
        ss_cols = 0.0

    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))

    denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if denom <= 0.0:
        raise InsufficientData("ratings carry no variance")
    # The raw estimator can undershoot -1 for strongly anti-correlated
    # raters; results are clamped into the coefficient's [-1, 1] range.
    raw = (msr - mse) / denom
    estimate = max(-1.0, min(1.0, raw))

    if mse <= 0.0 and msc <= 0.0:
        # Perfect agreement: interval collapses onto the estimate.
        return IccResult(estimate, estimate, estimate, n, k)

    alpha = 0.05
    a = (k * raw) / (n * (1.0 - raw))
    b = 1.0 + (k * raw * (n - 1)) / (n * (1.0 - raw))
    v = ((a * msc + b * mse) ** 2
         / ((a * msc) ** 2 / (k - 1) + (b * mse) ** 2 / ((n - 1) * (k - 1))))
    if not math.isfinite(v) or v <= 0.0:
        v = (n - 1) * (k - 1)
    fl = f_ppf(1.0 - alpha / 2.0, n - 1, v)
    fu = f_ppf(1.0 - alpha / 2.0, v, n - 1)
    ci_low = n * (msr - fl * mse) / (fl * (k * msc + (k * n - k - n) * mse) + n * msr)
    ci_high = n * (fu * msr - mse) / (k * msc + (k * n - k - n) * mse + n * fu * msr)
    ci_low = max(-1.0, min(estimate, ci_low))
    ci_high = min(1.0, max(estimate, ci_high))
    return IccResult(estimate, ci_low, ci_high, n, k)


# --- assembling stats inputs from records -----------------------------------

def category_groups(records: list[LikertRecord], category: str) -> list[tuple[str, list[float]]]:
    """One (label, observations) group per config; observations are
    individual rater scores."""
    by_label: dict[str, list[float]] = {}
    for rec in records:
        by_label.setdefault(rec.config_label, []).append(float(getattr(rec, category)))
    return [(label, by_label[label]) for label in sorted(by_label)]


def icc_matrix(records: list[LikertRecord], category: str) -> list[list[float | None]]:
    """Subjects x raters matrix for one category; subjects are
    (profile, config) outputs."""
    raters = sorted({r.rater_id for r in records})
    cells: dict[tuple[str, str], dict[str, float]] = {}
    for rec in records:
        cells.setdefault((rec.profile_id, rec.config_label), {})[rec.rater_id] = float(
            getattr(rec, category))
    matrix = []
    for key in sorted(cells):
        row = [cells[key].get(rater) for rater in raters]
        matrix.append(row)
    return matrix


def ragfs_vs_nrag_ttests(readability_rows: list[dict]) -> dict[str, WelchResult]:
    """Per-model Welch tests of RAGFS vs NRAG FRES scores, where both exist."""
    samples: dict[tuple[str, str], list[float]] = {}
    for row in readability_rows:
        label = row["config_label"]
        model, _, mode = label.rpartition("_")
        if mode in ("RAGFS", "NRAG") and model:
            samples.setdefault((model, mode), []).append(float(row["fres"]))
    out = {}
    for model in sorted({m for m, _ in samples}):
        a = samples.get((model, "RAGFS"))
        b = samples.get((model, "NRAG"))
        if a and b and len(a) >= 2 and len(b) >= 2:
            try:
                out[model] = welch_t(a, b)
            except DegenerateInput:
                continue
    return out


# --- report rendering --------------------------------------------------------

def round_half_away(x: float, digits: int = 2) -> float:
    scale = 10 ** digits
    return math.copysign(math.floor(abs(x) * scale + 0.5) / scale, x)


def _cell(mean: float, sd: float) -> str:
    return f"{round_half_away(mean):.2f} ({round_half_away(sd):.2f})"


def render_reports(
    summaries: list[ConfigSummary],
    readability_rows: list[dict],
    anovas: dict[str, AnovaResult],
    iccs: dict[str, IccResult],
    out_dir: str | Path,
) -> list[Path]:
    """Write table2.csv, table3.csv, anova.json, icc.json and radar.json.

    With no readability rows, the readability-dependent outputs (table3,
    radar) are skipped and a notice is written instead.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    notices: list[str] = []

    table2 = out / "table2.csv"
    with open(table2, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_label", "redundancy", "accuracy", "completeness", "total_score"])
        for s in summaries:
            writer.writerow([
                s.config_label,
                _cell(s.redundancy.mean, s.redundancy.sd),
                _cell(s.accuracy.mean, s.accuracy.sd),
                _cell(s.completeness.mean, s.completeness.sd),
                f"{round_half_away(s.total_score):.2f}",
            ])
    written.append(table2)

    read_by_label: dict[str, list[dict]] = {}
    for row in readability_rows:
        read_by_label.setdefault(row["config_label"], []).append(row)

    if read_by_label:
        table3 = out / "table3.csv"
        with open(table3, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config_label", "fres", "fk_grade",
                             "num_words", "num_syllables", "num_sentences"])
            for label in sorted(read_by_label):
                rows = read_by_label[label]
                scores = [float(r["fres"]) for r in rows]
                mean_fres = _mean(scores)
                writer.writerow([
                    label,
                    _cell(mean_fres, _sample_sd(scores)),
                    fres_grade_label(mean_fres),
                    f"{round_half_away(_mean([float(r['num_words']) for r in rows])):.2f}",
                    f"{round_half_away(_mean([float(r['num_syllables']) for r in rows])):.2f}",
                    f"{round_half_away(_mean([float(r['num_sentences']) for r in rows])):.2f}",
                ])
        written.append(table3)

        missing = [s.config_label for s in summaries if s.config_label not in read_by_label]
        if missing:
            raise LabelMismatch(f"no readability rows for configs: {missing}")
        mean_fres_by_label = {
            label: _mean([float(r["fres"]) for r in rows])
            for label, rows in read_by_label.items()
        }
        relevant = [mean_fres_by_label[s.config_label] for s in summaries]
        lo, hi = min(relevant), max(relevant)
        radar = out / "radar.json"
        radar.write_text(json.dumps({
            "axes": ["redundancy", "accuracy", "completeness", "readability_scaled"],
            "series": [
                {
                    "config_label": s.config_label,
                    "values": [
                        s.redundancy.mean,
                        s.accuracy.mean,
                        s.completeness.mean,
                        ((mean_fres_by_label[s.config_label] - lo) / (hi - lo)
                         if hi > lo else 0.0),
                    ],
                }
                for s in summaries
            ],
        }, indent=2), encoding="utf-8")
        written.append(radar)
    else:
        notices.append("no readability rows: table3.csv and radar.json omitted")

    anova_path = out / "anova.json"
    anova_path.write_text(json.dumps({
        cat: {
            "f_stat": res.f_stat, "df_between": res.df_between,
            "df_within": res.df_within, "p_value": res.p_value,
            "degenerate": res.degenerate,
        }
        for cat, res in anovas.items()
    }, indent=2), encoding="utf-8")
    written.append(anova_path)

    icc_path = out / "icc.json"
    icc_path.write_text(json.dumps({
        cat: {
            "estimate": res.estimate, "ci_low": res.ci_low, "ci_high": res.ci_high,
            "n_subjects": res.n_subjects, "n_raters": res.n_raters,
        }
        for cat, res in iccs.items()
    }, indent=2), encoding="utf-8")
    written.append(icc_path)

    if notices:
        notice_path = out / "notices.txt"
        notice_path.write_text("\n".join(notices) + "\n", encoding="utf-8")
        written.append(notice_path)
    return written
