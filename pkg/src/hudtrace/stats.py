"""Rank statistics, survey joins, and the correlation report generator.

Spearman's coefficient is the Pearson correlation of average-tie ranks; the
two-sided p-value comes from the Student-t approximation evaluated with the
regularized incomplete beta function, with an exhaustive permutation test
available for small samples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc

MAX_EXHAUSTIVE_N = 9

STRENGTH_BANDS = ((0.5, "strong"), (0.3, "medium"), (0.0, "weak"))
SIGNIFICANCE_BANDS = ((0.001, "p<0.001"), (0.01, "p<0.01"), (0.05, "p<0.05"))


class UndefinedCorrelationError(ValueError):
    """One input has zero rank variance; the coefficient is undefined."""


@dataclass(frozen=True)
class CorrelationResult:
    metric_x: str
    metric_y: str
    r_s: float
    n: int
    p: float

    @property
    def df(self) -> int:
        return self.n - 2


def rank(values) -> np.ndarray:
    """Average-tie ranks 1..n; ties share the mean of the ranks they occupy."""
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("rank expects a non-empty 1-D sequence")
    if not np.all(np.isfinite(a)):
        raise ValueError("rank input must be finite")
    order = np.argsort(a, kind="stable")
    ranks = np.empty(a.size, dtype=np.float64)
    sorted_vals = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    den = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if den == 0.0:
        raise UndefinedCorrelationError("zero rank variance")
    return float((xc * yc).sum() / den)


def t_approx_p(r: float, n: int) -> float:
    """Two-sided p from t = r*sqrt((n-2)/(1-r^2)) against Student-t(n-2)."""
    if n < 3:
        return float("nan")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t2 = r * r * df / (1.0 - r * r)
    return float(betainc(df / 2.0, 0.5, df / (df + t2)))


def permutation_p(x, y, exhaustive: bool = True) -> float:
    """Two-sided exhaustive permutation p-value for Spearman's coefficient."""
    rx = rank(x)
    ry = rank(y)
    n = rx.size
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive permutation limited to n <= {MAX_EXHAUSTIVE_N}")
    observed = abs(_pearson(rx, ry))
    count = 0
    total = 0
    for perm in itertools.permutations(range(n)):
        r = _pearson(rx, ry[list(perm)])
        if abs(r) >= observed - 1e-12:
            count += 1
        total += 1
    return count / total


def spearman(x, y, metric_x: str = "x", metric_y: str = "y",
             permutation: bool = False) -> CorrelationResult:
    """Spearman rank correlation with two-sided p-value.

    ``permutation=True`` replaces the t-approximation with the exhaustive
    permutation p (small n only).  |r_s| = 1 pins p = 0.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D sequences")
    n = xa.size
    if n < 3:
        raise ValueError("need at least 3 paired observations")
    r = _pearson(rank(xa), rank(ya))
    r = min(1.0, max(-1.0, r))
    if permutation:
        p = 0.0 if abs(r) >= 1.0 else permutation_p(xa, ya)
    else:
        p = t_approx_p(r, n)
    return CorrelationResult(metric_x=metric_x, metric_y=metric_y, r_s=r, n=n, p=p)


def strength_label(r: float) -> str:
    for bound, label in STRENGTH_BANDS:
        if abs(r) >= bound:
            return label
    return "weak"


def significance_label(p: float) -> str:
    for bound, label in SIGNIFICANCE_BANDS:
        if p < bound:
            return label
    return "n.s."


# ---------------------------------------------------------------------------
# survey join


@dataclass(frozen=True)
class SurveyRow:
    participant_id: str
    game_id: str
    satisfaction: int  # Likert 1-5
    enjoyment: int  # Likert 1-5
    strategy: str
    hours_gaming_per_week: float
    fortnite_watch_hours: float

    def validate(self) -> None:
        for name, v in (("satisfaction", self.satisfaction),
                        ("enjoyment", self.enjoyment)):
            if v not in (1, 2, 3, 4, 5):
                raise ValueError(f"{name} must be a Likert value 1-5, got {v}")


SURVEY_COLUMNS = ("participant_id,game_id,satisfaction,enjoyment,strategy,"
                  "hours_gaming_per_week,fortnite_watch_hours")


def read_survey_csv(path) -> list[SurveyRow]:
    import csv

    rows: list[SurveyRow] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as f:
        for rec in csv.DictReader(f):
            row = SurveyRow(
                participant_id=rec["participant_id"],
                game_id=rec["game_id"],
                satisfaction=int(rec["satisfaction"]),
                enjoyment=int(rec["enjoyment"]),
                strategy=rec.get("strategy", ""),
                hours_gaming_per_week=float(rec["hours_gaming_per_week"]),
                fortnite_watch_hours=float(rec["fortnite_watch_hours"]),
            )
            row.validate()
            if row.game_id in seen:
                raise ValueError(f"duplicate game_id in survey: {row.game_id}")
            seen.add(row.game_id)
            rows.append(row)
    return rows


TABLE_METRICS = ("satisfaction", "enjoyment", "duration_s", "place", "kills",
                 "landed_in_landing_hotspot", "landed_in_activity_hotspot",
                 "hours_gaming_per_week", "fortnite_watch_hours")


def join_survey(records, survey: list[SurveyRow], landing_hotspots=None,
                activity_hotspots=None) -> tuple[list[dict], list[SurveyRow]]:
    """One analysis row per survey row whose game_id resolves to a record.

    Returns (table, unmatched survey rows).  Hotspot membership columns are
    0/1 flags of whether the game's landing spot falls inside any hotspot of
    the given map; they are 0 when no map or no landing spot is available.
    """
    by_id = {}
    for rec in records:
        if rec.game_id in by_id:
            raise ValueError(f"duplicate game_id among records: {rec.game_id}")
        by_id[rec.game_id] = rec

    table: list[dict] = []
    unmatched: list[SurveyRow] = []
    for row in survey:
        rec = by_id.get(row.game_id)
        if rec is None:
            unmatched.append(row)
            continue
        landing = rec.landing_spot

        def member(hmap) -> int:
            if hmap is None or landing is None:
                return 0
            return 1 if hmap.contains(landing) is not None else 0

        table.append({
            "game_id": row.game_id,
            "satisfaction": float(row.satisfaction),
            "enjoyment": float(row.enjoyment),
            "duration_s": float(rec.game_duration_s),
            "place": float(rec.final_place) if rec.final_place is not None else math.nan,
            "kills": float(rec.total_kills),
            "landed_in_landing_hotspot": float(member(landing_hotspots)),
            "landed_in_activity_hotspot": float(member(activity_hotspots)),
            "hours_gaming_per_week": float(row.hours_gaming_per_week),
            "fortnite_watch_hours": float(row.fortnite_watch_hours),
        })
    return table, unmatched


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class ReportEntry:
    metric_x: str
    metric_y: str
    result: CorrelationResult | None  # None when undefined
    error: str = ""

    @property
    def strength(self) -> str:
        return strength_label(self.result.r_s) if self.result else ""

    @property
    def significance(self) -> str:
        return significance_label(self.result.p) if self.result else ""


def hypothesis_report(table: list[dict], pairs: list[tuple[str, str]],
                      permutation: bool = False) -> list[ReportEntry]:
    """CorrelationResult per metric pair; undefined pairs are reported, not
    fatal.  Rows with a NaN in either metric are dropped pairwise."""
    entries: list[ReportEntry] = []
    for mx, my in pairs:
        for m in (mx, my):
            if table and m not in table[0]:
                raise KeyError(f"metric not in table: {m}")
        xs = np.array([row[mx] for row in table], dtype=np.float64)
        ys = np.array([row[my] for row in table], dtype=np.float64)
        keep = np.isfinite(xs) & np.isfinite(ys)
        xs, ys = xs[keep], ys[keep]
        try:
            if xs.size < 3:
                raise ValueError(f"fewer than 3 joined samples for ({mx}, {my})")
            res = spearman(xs, ys, mx, my, permutation=permutation)
            entries.append(ReportEntry(metric_x=mx, metric_y=my, result=res))
        except (UndefinedCorrelationError, ValueError) as exc:
            entries.append(ReportEntry(metric_x=mx, metric_y=my, result=None,
                                       error=str(exc)))
    return entries


def format_report_text(entries: list[ReportEntry]) -> str:
    lines = ["metric pair correlations (Spearman rank)", ""]
    for e in entries:
        if e.result is None:
            lines.append(f"  {e.metric_x} ~ {e.metric_y}: undefined ({e.error})")
            continue
        r = e.result
        lines.append(
            f"  {e.metric_x} ~ {e.metric_y}: r_s({r.df}) = {r.r_s:+.3f}, "
            f"{e.significance} (n = {r.n}, p = {r.p:.6f}, {e.strength})")
    return "\n".join(lines) + "\n"


def write_report_csv(entries: list[ReportEntry], path) -> None:
    lines = ["metric_x,metric_y,r_s,n,p,strength,significance"]
    for e in entries:
        if e.result is None:
            lines.append(f"{e.metric_x},{e.metric_y},,,,undefined,undefined")
        else:
            r = e.result
            lines.append(f"{e.metric_x},{e.metric_y},{r.r_s!r},{r.n},{r.p!r},"
                         f"{e.strength},{e.significance}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
